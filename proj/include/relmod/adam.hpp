#ifndef RELMOD_ADAM_HPP
#define RELMOD_ADAM_HPP

#include <cstdint>
#include <vector>

#include "relmod/tensor.hpp"

namespace relmod {

struct AdamConfig {
    double lr = 0.0008;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moment estimates. One state covers a whole
/// parameter set; the step counter is shared.
class Adam {
public:
    Adam(std::vector<TensorPtr> params, AdamConfig cfg);

    /// Applies one update from the accumulated gradients, then clears them.
    /// Rejects parameters whose gradient buffer is missing.
    void step();
    void zero_grad();

    double lr() const { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<TensorPtr> params_;
    AdamConfig cfg_;
    int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace relmod

#endif  // RELMOD_ADAM_HPP
