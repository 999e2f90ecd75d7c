// SPDX-License-Identifier: Apache-2.0
//
// Degradation pipelines that turn HR images into LR inputs, and seeded patch
// sampling for training.
//
// Bicubic resampling uses the Keys kernel (a = -0.5) with 4 taps per axis,
// half-pixel centers (src = (dst + 0.5) / s - 0.5) and edge replication. There
// is no antialiasing widening on downscale.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsr/tensor.hpp"

namespace lsr {

inline constexpr double kKeysA = -0.5;
inline constexpr int kBlurSize = 7;
inline constexpr double kBlurSigma = 1.6;
inline constexpr double kNoiseSigma = 30.0 / 255.0;
inline constexpr int kDefaultLrPatch = 64;

enum class Degradation { BI, BD, DN };

const char* to_string(Degradation d);
Degradation parse_degradation(const std::string& text);

double keys_cubic(double x, double a = kKeysA);

/// Resize by `up / down`; one of them must be 1 and the other in {1, 2, 3, 4}.
/// Downscaling requires dimensions divisible by `down`.
Tensor bicubic_resize(const Tensor& image, int up, int down);

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
std::vector<double> gaussian_taps(int size, double sigma);

/// Separable Gaussian blur with edge replication.
Tensor gaussian_blur(const Tensor& image, int size = kBlurSize, double sigma = kBlurSigma);

/// Crops height and width down to multiples of `multiple` (top-left anchored).
Tensor crop_to_multiple(const Tensor& image, int multiple);

/// Bicubic downscale by `scale`.
Tensor degrade_bi(const Tensor& hr, int scale);
/// Gaussian blur then bicubic downscale by `scale`; clamped to [0, 1].
Tensor degrade_bd(const Tensor& hr, int scale = 3);
/// Bicubic downscale, additive Gaussian noise of std `sigma`, clamp.
Tensor degrade_dn(const Tensor& hr, std::uint64_t seed, int scale = 3, double sigma = kNoiseSigma);

/// Crops `hr` to a multiple of `scale` and applies the pipeline.
Tensor degrade(const Tensor& hr, Degradation mode, int scale, std::uint64_t seed);

/// Rotates by 90 degrees counter-clockwise `quarter_turns` times, then
/// mirrors horizontally when `flip` is set.
Tensor rotate_flip(const Tensor& image, int quarter_turns, bool flip);

struct PatchPair {
    Tensor lr;
    Tensor hr;
    int lr_y = 0;
    int lr_x = 0;
    int quarter_turns = 0;
    bool flip = false;
};

/// Aligned random crops (LR lr_size x lr_size, HR scaled by `scale`). With
/// `augment` the same seeded rotation and flip apply to both crops.
std::vector<PatchPair> extract_patches(const Tensor& hr, const Tensor& lr, int scale, int lr_size, int count,
                                       std::uint64_t seed, bool augment);

}  // namespace lsr
