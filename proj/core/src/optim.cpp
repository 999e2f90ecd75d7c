// SPDX-License-Identifier: Apache-2.0
#include "lsr/optim.hpp"

#include <cmath>
#include <numbers>

#include "lsr/error.hpp"

namespace lsr {

double cosine_lr(long t, long period, double lr_max, double lr_min) {
    if (period <= 0 || t < 0) {
        throw ContractError("cosine_lr requires t >= 0 and period > 0");
    }
    const long phase = (t > 0 && t % period == 0) ? period : t % period;
    const double ratio = static_cast<double>(phase) / static_cast<double>(period);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * ratio));
}

template <typename T>
void adam_step(std::span<NamedParam<T>> params, std::span<const BasicTensor<T>> grads,
               AdamState<T>& state, double lr) {
    if (params.size() != grads.size()) {
        throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                            std::to_string(grads.size()) + " gradients");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].var.shape()) {
            throw DimensionError("adam_step: gradient shape " + grads[i].shape().str() +
                                 " does not match parameter " + params[i].name);
        }
        if (!grads[i].all_finite()) {
            throw TrainingError("non-finite gradient for parameter " + params[i].name);
        }
    }
    ++state.step;
    const AdamConfig& c = state.config;
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& slot = state.moments[params[i].name];
        if (slot.m.empty()) {
            slot.m = BasicTensor<T>(grads[i].shape());
            slot.v = BasicTensor<T>(grads[i].shape());
        }
        BasicTensor<T>& value = params[i].var.mutable_value();
        const BasicTensor<T>& g = grads[i];
        for (std::size_t j = 0; j < value.numel(); ++j) {
            const double gj = g[j];
            const double m = c.beta1 * slot.m[j] + (1.0 - c.beta1) * gj;
            const double v = c.beta2 * slot.v[j] + (1.0 - c.beta2) * gj * gj;
            slot.m[j] = static_cast<T>(m);
            slot.v[j] = static_cast<T>(v);
            const double update = lr * (m / correction1) / (std::sqrt(v / correction2) + c.eps);
            value[j] = static_cast<T>(value[j] - update);
        }
    }
}

template void adam_step(std::span<NamedParam<float>>, std::span<const BasicTensor<float>>,
                        AdamState<float>&, double);
template void adam_step(std::span<NamedParam<double>>, std::span<const BasicTensor<double>>,
                        AdamState<double>&, double);

}  // namespace lsr
