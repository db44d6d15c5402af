#ifndef RELMOD_CHECKPOINT_HPP
#define RELMOD_CHECKPOINT_HPP

#include <string>
#include <utility>
#include <vector>

#include "relmod/config.hpp"
#include "relmod/data.hpp"
#include "relmod/model.hpp"

namespace relmod {

/// On-disk model container: an 8-byte magic, a little-endian uint64 header
/// length, a JSON header (config, vocabulary, epoch, metric history, tensor
/// directory), then the raw little-endian float64 payload. Loading restores
/// forward outputs bit-exactly.
struct Checkpoint {
    RunConfig config;
    std::vector<std::string> vocab_tokens;
    int epoch = 0;
    std::string metric_history_json = "[]";
    std::vector<std::string> tensor_names;
    std::vector<std::vector<int>> tensor_shapes;
    std::vector<std::vector<double>> tensor_values;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    Vocab vocab() const { return Vocab::from_tokens(vocab_tokens); }
    Model restore_model() const;
};

Checkpoint snapshot(const Model& model, const RunConfig& config, const Vocab& vocab, int epoch,
                    const std::string& metric_history_json);

}  // namespace relmod

#endif  // RELMOD_CHECKPOINT_HPP
