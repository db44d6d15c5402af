#ifndef RELMOD_AUGMENT_HPP
#define RELMOD_AUGMENT_HPP

#include <optional>
#include <random>

#include "relmod/data.hpp"
#include "relmod/tensor.hpp"

namespace relmod {
namespace augment {

/// Separate start/end hidden layers trained on plausible and true answer
/// spans, plus the 3h -> h projection that fuses them back into the context.
struct AugmentParams {
    TensorPtr w1, b1;      // h -> h for the start states S
    TensorPtr w2, b2;      // h -> h for the end states E
    TensorPtr w;           // 3h -> h fusion
    TensorPtr w_bias;      // optional bias for the fusion (disabled by default)
    TensorPtr s_proj;      // h -> 1 start logits for the auxiliary loss
    TensorPtr e_proj;      // h -> 1 end logits
    bool use_fusion_bias = false;
    int hidden_dim = 0;
};

AugmentParams make_augment_params(std::mt19937_64& rng, int hidden_dim, bool use_fusion_bias);

struct Hidden {
    TensorPtr s;  // L x h
    TensorPtr e;  // L x h
};

/// S = tanh(C.W1 + b1), E = tanh(C.W2 + b2).
Hidden plausible_hidden(const TensorPtr& context, const AugmentParams& p);

/// X = [C; S; E].W (concatenation along the hidden axis, projected back).
TensorPtr augment_context(const TensorPtr& context, const TensorPtr& s, const TensorPtr& e,
                          const AugmentParams& p);

/// Cross-entropy of the projected S/E states against the plausible-or-true
/// span. Returns null when the example carries no span (contributes 0).
/// The optional mask hides padded positions; the span must stay visible.
TensorPtr plausible_span_loss(const TensorPtr& s, const TensorPtr& e, const Mask& position_mask,
                              const std::optional<Span>& target, const AugmentParams& p);

}  // namespace augment
}  // namespace relmod

#endif  // RELMOD_AUGMENT_HPP
