// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>

#include "lsr/autodiff.hpp"

namespace lsr {

inline constexpr double kDefaultLrMax = 5e-4;
inline constexpr double kDefaultLrMin = 1e-7;

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * (t mod period) / period)) / 2.
/// t == period maps to lr_min rather than wrapping.
double cosine_lr(long t, long period, double lr_max = kDefaultLrMax, double lr_min = kDefaultLrMin);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct NamedParam {
    std::string name;
    Var<T> var;
};

template <typename T>
struct AdamState {
    struct Moments {
        BasicTensor<T> m;
        BasicTensor<T> v;
    };
    AdamConfig config{};
    long step = 0;
    std::map<std::string, Moments> moments;
};

/// One bias-corrected Adam update, in place on every parameter's value.
/// grads[i] belongs to params[i]. Every gradient is checked before any
/// parameter changes; a non-finite entry throws TrainingError naming it.
template <typename T>
void adam_step(std::span<NamedParam<T>> params, std::span<const BasicTensor<T>> grads,
               AdamState<T>& state, double lr);

}  // namespace lsr
