#ifndef RELMOD_OBJECTS_HPP
#define RELMOD_OBJECTS_HPP

#include <random>
#include <string>

#include "relmod/tensor.hpp"

namespace relmod {
namespace objects {

enum class Activation { kTanh, kRelu };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

/// Multi-head self-attentive pooling weights: A = softmax(W4 sigma(W3 X^T)).
struct ExtractorParams {
    TensorPtr w3;  // h x h
    TensorPtr w4;  // n x h
    int heads = 0;
    Activation activation = Activation::kTanh;
};

ExtractorParams make_extractor_params(std::mt19937_64& rng, int hidden_dim, int heads,
                                      Activation activation, const std::string& prefix);

/// n x L attention matrix with masked tokens exactly zero; every row sums
/// to 1 over the visible tokens. `token_mask` has one entry per token.
TensorPtr attention_matrix(const TensorPtr& x, const std::vector<uint8_t>& token_mask,
                           const ExtractorParams& p);
TensorPtr attention_matrix(const TensorPtr& x, const ExtractorParams& p);

/// O = A X.
TensorPtr extract(const TensorPtr& a, const TensorPtr& x);

struct ObjectSet {
    TensorPtr attention;  // n x L
    TensorPtr objects;    // n x h
};

ObjectSet extract_objects(const TensorPtr& x, const std::vector<uint8_t>& token_mask,
                          const ExtractorParams& p);

/// alpha * ||A A^T - I|| with the Frobenius norm (optionally squared).
TensorPtr orthogonality_penalty(const TensorPtr& a, double alpha, bool squared = false);

}  // namespace objects
}  // namespace relmod

#endif  // RELMOD_OBJECTS_HPP
