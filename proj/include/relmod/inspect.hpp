#ifndef RELMOD_INSPECT_HPP
#define RELMOD_INSPECT_HPP

#include <string>
#include <vector>

#include "relmod/data.hpp"
#include "relmod/model.hpp"

namespace relmod {

struct TokenWeight {
    int position = 0;
    std::string token;
    double weight = 0.0;
};

struct HeadTopK {
    std::string side;  // "context" or "question"
    int head = 0;
    std::vector<TokenWeight> top;  // sorted by weight, descending
};

/// Runs the extractor on one example and returns, per head, the k
/// highest-weight tokens straight out of the attention matrix.
std::vector<HeadTopK> inspect_example(const Model& model, const Vocab& vocab, const Example& ex,
                                      int k);

/// One JSON line per head.
std::string inspection_to_json_lines(const std::string& example_id,
                                     const std::vector<HeadTopK>& heads);

}  // namespace relmod

#endif  // RELMOD_INSPECT_HPP
