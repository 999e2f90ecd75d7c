// SPDX-License-Identifier: Apache-2.0
//
// Shared plumbing for network components: named tensor traversal (used by the
// optimizer and checkpoints) and analytic cost rows (used by the profiler).
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lsr/autodiff.hpp"

namespace lsr {

enum class TensorRole { Parameter, Buffer };

template <typename T>
using TensorVisitor = std::function<void(const std::string& name, Var<T>& var, TensorRole role)>;

inline std::string join_name(const std::string& prefix, const std::string& leaf) {
    return prefix.empty() ? leaf : prefix + "." + leaf;
}

enum class CostMode { Training, Inference };

struct CostRow {
    std::string name;
    std::int64_t params = 0;
    std::int64_t madds = 0;
    int out_h = 0;
    int out_w = 0;
};

/// Collects cost rows while a component walks its layers.
struct CostSink {
    CostMode mode = CostMode::Inference;
    std::vector<CostRow> rows;

    void add(std::string name, std::int64_t params, std::int64_t madds, int out_h, int out_w) {
        rows.push_back({std::move(name), params, madds, out_h, out_w});
    }
};

/// Parameters and MAdds of a dense convolution producing an out_h x out_w map.
inline std::int64_t conv_param_count(int in_c, int out_c, int k, int groups, bool bias) {
    return static_cast<std::int64_t>(out_c) * (in_c / groups) * k * k + (bias ? out_c : 0);
}
inline std::int64_t conv_madds(int in_c, int out_c, int k, int groups, int out_h, int out_w) {
    return static_cast<std::int64_t>(k) * k * (in_c / groups) * out_c * out_h * out_w;
}

}  // namespace lsr
