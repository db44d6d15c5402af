#ifndef RELMOD_INIT_HPP
#define RELMOD_INIT_HPP

#include <cmath>
#include <random>
#include <string>

#include "relmod/tensor.hpp"

namespace relmod {

/// Uniform in [-limit, limit) from the raw engine; avoids the
/// implementation-defined std distributions for reproducibility.
inline double uniform_pm(std::mt19937_64& rng, double limit) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    return (2.0 * u - 1.0) * limit;
}

inline TensorPtr xavier_leaf(std::mt19937_64& rng, std::vector<int> shape,
                             const std::string& name) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    const double fan_in = static_cast<double>(shape[0]);
    const double fan_out = static_cast<double>(shape.size() > 1 ? shape[1] : 1);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = uniform_pm(rng, limit);
    auto t = Tensor::leaf(std::move(shape), std::move(v));
    t->name = name;
    return t;
}

inline TensorPtr zeros_leaf(std::vector<int> shape, const std::string& name) {
    auto t = Tensor::zeros(std::move(shape), true);
    t->name = name;
    return t;
}

}  // namespace relmod

#endif  // RELMOD_INIT_HPP
