// SPDX-License-Identifier: Apache-2.0
//
// PSNR and SSIM on the BT.601 studio-range luma channel (0-255 scale).
// Luma stays in floating point; no 8-bit rounding happens before the metrics.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lsr/tensor.hpp"

namespace lsr {

inline constexpr double kLumaOffset = 16.0;
inline constexpr double kLumaR = 65.481;
inline constexpr double kLumaG = 128.553;
inline constexpr double kLumaB = 24.966;
inline constexpr double kPeak = 255.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Returned by psnr for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

struct MetricConfig {
    int shave = 0;  // border pixels removed on each side; conventionally the scale
    int window = kSsimWindow;
    double sigma = kSsimSigma;
    double k1 = kSsimK1;
    double k2 = kSsimK2;
    double peak = kPeak;

    static MetricConfig for_scale(int scale) {
        MetricConfig cfg;
        cfg.shave = scale;
        return cfg;
    }
};

/// RGB in [0, 1] (n x 3 x h x w) to luma (n x 1 x h x w) on the 0-255 scale.
Tensor64 rgb_to_y(const Tensor& rgb);

/// Removes `shave` pixels from each border; requires shave < min(h, w) / 2.
Tensor64 shave_border(const Tensor64& image, int shave);

/// 10 log10(peak^2 / MSE) over the shaved luma; kPsnrIdentical when MSE is 0.
double psnr(const Tensor64& a, const Tensor64& b, const MetricConfig& cfg = {});

/// Mean of the Gaussian-windowed SSIM map over the valid region of the shaved
/// luma. Needs at least `window` pixels per side after shaving.
double ssim(const Tensor64& a, const Tensor64& b, const MetricConfig& cfg = {});

struct MetricRow {
    std::string file;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

/// PSNR and SSIM of an SR/HR RGB pair on luma.
MetricRow evaluate_pair(const Tensor& sr, const Tensor& hr, const MetricConfig& cfg, std::string file = {});

/// "file,psnr_db,ssim" header plus one row each; identical pairs print "inf".
std::string metrics_csv(const std::vector<MetricRow>& rows);

}  // namespace lsr
