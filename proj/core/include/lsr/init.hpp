// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "lsr/autodiff.hpp"

namespace lsr {

/// Seeded parameter initializer. Draws are sequential, so construction order
/// fixes every value.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    /// Uniform in [-bound, bound].
    template <typename T>
    Var<T> uniform(Shape shape, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        BasicTensor<T> t(shape);
        for (auto& v : t.data()) {
            v = static_cast<T>(dist(rng_));
        }
        return Var<T>::parameter(std::move(t));
    }

    /// Conv weight (out, in/groups, k, k) with bound 1/sqrt(fan_in).
    template <typename T>
    Var<T> conv_weight(int in_c, int out_c, int k, int groups) {
        return uniform<T>(Shape{out_c, in_c / groups, k, k}, fan_in_bound(in_c / groups * k * k));
    }

    template <typename T>
    Var<T> conv_bias(int in_c, int out_c, int k, int groups) {
        return uniform<T>(Shape{1, out_c, 1, 1}, fan_in_bound(in_c / groups * k * k));
    }

    std::mt19937_64& engine() { return rng_; }

private:
    static double fan_in_bound(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

    std::mt19937_64 rng_;
};

template <typename T>
Var<T> zero_parameter(Shape shape) {
    return Var<T>::parameter(BasicTensor<T>(shape));
}

}  // namespace lsr
