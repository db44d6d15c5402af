#include "relmod/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace relmod {

Adam::Adam(std::vector<TensorPtr> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p->val.size(), 0.0);
        v_.emplace_back(p->val.size(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_) {
        if (p->grad.size() != p->val.size()) {
            throw std::invalid_argument("adam: parameter '" + p->name +
                                        "' has no gradient buffer");
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (size_t i = 0; i < p.val.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.val[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.zero_grad();
    }
}

void Adam::zero_grad() {
    for (const auto& p : params_) p->zero_grad();
}

}  // namespace relmod
