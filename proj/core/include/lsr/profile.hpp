// SPDX-License-Identifier: Apache-2.0
//
// Analytic parameter and multiply-accumulate accounting.
//
// MAdds count one multiply-accumulate per weight tap per output pixel for
// every convolution; biases, normalization, pooling, activations and gates are
// excluded. Attention generators run once per sample. The latent path of a
// DCD unit is counted in factorized form (C_in L + L^2 + L C_out per pixel).
// FLOPs are 2 x MAdds under this convention.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsr/network.hpp"

namespace lsr {

struct CostReport {
    CostMode mode = CostMode::Inference;
    int out_h = 0;
    int out_w = 0;
    std::vector<CostRow> rows;

    std::int64_t total_params() const;
    std::int64_t total_madds() const;
    /// name,params,madds,out_h,out_w with a trailing total row.
    std::string to_csv() const;
    /// Column-aligned plain text with a total line.
    std::string to_table() const;
};

const char* to_string(CostMode mode);
CostMode parse_cost_mode(const std::string& text);

/// Training mode counts every branch of unfused rep kernels; inference mode
/// counts each rep kernel as one plain k x k convolution.
template <typename T>
CostReport profile_model(const Model<T>& model, CostMode mode, int out_h, int out_w);

template <typename T>
std::int64_t count_params(const Model<T>& model, CostMode mode);

template <typename T>
std::int64_t count_madds(const Model<T>& model, int out_h, int out_w, CostMode mode = CostMode::Inference);

}  // namespace lsr
