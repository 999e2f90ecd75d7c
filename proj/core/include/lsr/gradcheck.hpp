// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference gradient verification in 64-bit arithmetic.
//
// The scalar probe is sum_i <out_i, R_i> with fixed random R_i, so every output
// element contributes. Numeric derivatives use the five-point central stencil
// (f(-2h) - 8 f(-h) + 8 f(h) - f(2h)) / 12h. Entries whose h and 2h
// difference quotients disagree sit next to an activation or pooling kink;
// they are skipped and replaced by other entries of the same tensor.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lsr/optim.hpp"

namespace lsr {

inline constexpr double kGradStep = 1e-3;
inline constexpr double kGradTolerance = 1e-3;
inline constexpr double kLinearGradTolerance = 1e-8;
/// Relative disagreement between the h and 2h central differences that marks
/// a kink inside the stencil.
inline constexpr double kKinkThreshold = 1e-4;
inline constexpr double kCurvatureThreshold = 1e-2;

struct GradCheckOptions {
    double step = kGradStep;
    std::size_t max_entries = 16;  // sampled entries per tensor; all when fewer
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    std::string name;
    double max_rel_error = 0.0;
    std::string worst_entry;  // "tensor[index]"
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t entries = 0;
    std::size_t kinks_skipped = 0;
    double tolerance = kGradTolerance;

    /// Also fails when kinks displaced more than half of the probed entries.
    bool passed() const { return max_rel_error <= tolerance && kinks_skipped <= entries; }
};

using Forward64 = std::function<std::vector<Var<double>>()>;

/// max |analytic - numeric| / max(1e-8, |numeric|) over sampled entries of
/// every tensor in `inputs`. `forward` must rebuild its graph from the current
/// values of `inputs` on every call.
GradCheckReport grad_check(const std::string& name, const Forward64& forward, std::vector<NamedParam<double>> inputs,
                           const GradCheckOptions& opts = {}, double tolerance = kGradTolerance);

/// Checks a linear conv, dynamic convs, all four RDU variants, SDF, DDF,
/// spatial attention and a tiny full model.
std::vector<GradCheckReport> run_gradcheck_suite(const GradCheckOptions& opts = {});

}  // namespace lsr
