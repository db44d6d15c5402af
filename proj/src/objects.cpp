#include "relmod/objects.hpp"

#include <stdexcept>

#include "relmod/init.hpp"

namespace relmod {
namespace objects {

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::kTanh;
    if (name == "relu") return Activation::kRelu;
    throw std::invalid_argument("objects: unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
    return a == Activation::kTanh ? "tanh" : "relu";
}

ExtractorParams make_extractor_params(std::mt19937_64& rng, int hidden_dim, int heads,
                                      Activation activation, const std::string& prefix) {
    if (heads < 1) throw std::invalid_argument("objects: head count must be >= 1");
    ExtractorParams p;
    p.heads = heads;
    p.activation = activation;
    p.w3 = xavier_leaf(rng, {hidden_dim, hidden_dim}, prefix + ".w3");
    p.w4 = xavier_leaf(rng, {heads, hidden_dim}, prefix + ".w4");
    return p;
}

TensorPtr attention_matrix(const TensorPtr& x, const std::vector<uint8_t>& token_mask,
                           const ExtractorParams& p) {
    const int len = x->rows();
    if (len < 1) throw std::invalid_argument("attention_matrix: empty input");
    if (x->cols() != p.w3->cols()) {
        throw std::invalid_argument("attention_matrix: input " + x->shape_str() +
                                    " does not match W3 " + p.w3->shape_str());
    }
    if (static_cast<int>(token_mask.size()) != len) {
        throw std::invalid_argument("attention_matrix: mask length " +
                                    std::to_string(token_mask.size()) + " for " +
                                    std::to_string(len) + " tokens");
    }
    auto hidden = matmul(p.w3, transpose(x));  // h x L
    hidden = p.activation == Activation::kTanh ? tanh_op(hidden) : relu_op(hidden);
    auto logits = matmul(p.w4, hidden);  // n x L
    return softmax_rows(logits, Mask::broadcast_row(token_mask, p.heads));
}

TensorPtr attention_matrix(const TensorPtr& x, const ExtractorParams& p) {
    return attention_matrix(x, std::vector<uint8_t>(static_cast<size_t>(x->rows()), 1), p);
}

TensorPtr extract(const TensorPtr& a, const TensorPtr& x) {
    if (a->cols() != x->rows()) {
        throw std::invalid_argument("extract: A " + a->shape_str() + " against X " +
                                    x->shape_str());
    }
    return matmul(a, x);
}

ObjectSet extract_objects(const TensorPtr& x, const std::vector<uint8_t>& token_mask,
                          const ExtractorParams& p) {
    auto a = attention_matrix(x, token_mask, p);
    return {a, extract(a, x)};
}

TensorPtr orthogonality_penalty(const TensorPtr& a, double alpha, bool squared) {
    const int n = a->rows();
    std::vector<double> eye(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) eye[static_cast<size_t>(i) * n + i] = 1.0;
    auto gram = matmul(a, transpose(a));
    auto diff = sub(gram, Tensor::constant({n, n}, std::move(eye)));
    auto norm = frobenius_norm(diff);
    if (squared) norm = mul(norm, norm);
    return scale(norm, alpha);
}

}  // namespace objects
}  // namespace relmod
