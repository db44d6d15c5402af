#include "relmod/augment.hpp"

#include <stdexcept>

#include "relmod/init.hpp"

namespace relmod {
namespace augment {

AugmentParams make_augment_params(std::mt19937_64& rng, int hidden_dim, bool use_fusion_bias) {
    AugmentParams p;
    p.hidden_dim = hidden_dim;
    p.use_fusion_bias = use_fusion_bias;
    p.w1 = xavier_leaf(rng, {hidden_dim, hidden_dim}, "augment.w1");
    p.b1 = zeros_leaf({1, hidden_dim}, "augment.b1");
    p.w2 = xavier_leaf(rng, {hidden_dim, hidden_dim}, "augment.w2");
    p.b2 = zeros_leaf({1, hidden_dim}, "augment.b2");
    p.w = xavier_leaf(rng, {3 * hidden_dim, hidden_dim}, "augment.w");
    if (use_fusion_bias) p.w_bias = zeros_leaf({1, hidden_dim}, "augment.w_bias");
    p.s_proj = xavier_leaf(rng, {hidden_dim, 1}, "augment.s_proj");
    p.e_proj = xavier_leaf(rng, {hidden_dim, 1}, "augment.e_proj");
    return p;
}

Hidden plausible_hidden(const TensorPtr& context, const AugmentParams& p) {
    if (context->cols() != p.hidden_dim) {
        throw std::invalid_argument("plausible_hidden: context " + context->shape_str() +
                                    " does not match hidden size " + std::to_string(p.hidden_dim));
    }
    auto s = tanh_op(add_row_broadcast(matmul(context, p.w1), p.b1));
    auto e = tanh_op(add_row_broadcast(matmul(context, p.w2), p.b2));
    return {s, e};
}

TensorPtr augment_context(const TensorPtr& context, const TensorPtr& s, const TensorPtr& e,
                          const AugmentParams& p) {
    if (context->shape != s->shape || context->shape != e->shape) {
        throw std::invalid_argument("augment_context: C " + context->shape_str() + ", S " +
                                    s->shape_str() + ", E " + e->shape_str() + " must match");
    }
    auto fused = matmul(concat_cols({context, s, e}), p.w);
    if (p.use_fusion_bias) fused = add_row_broadcast(fused, p.w_bias);
    return fused;
}

TensorPtr plausible_span_loss(const TensorPtr& s, const TensorPtr& e, const Mask& position_mask,
                              const std::optional<Span>& target, const AugmentParams& p) {
    if (!target) return nullptr;
    const int len = s->rows();
    if (target->start < 0 || target->end < target->start || target->end >= len) {
        throw std::invalid_argument("plausible_span_loss: span [" +
                                    std::to_string(target->start) + ", " +
                                    std::to_string(target->end) + "] outside length " +
                                    std::to_string(len));
    }
    auto start_logits = transpose(matmul(s, p.s_proj));
    auto end_logits = transpose(matmul(e, p.e_proj));
    auto ls = cross_entropy(start_logits, target->start, position_mask);
    auto le = cross_entropy(end_logits, target->end, position_mask);
    return add(ls, le);
}

}  // namespace augment
}  // namespace relmod
