// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "lsr/tensor.hpp"

namespace lsr {

/// Reads any PNG as 1 x 3 x h x w RGB in [0, 1]. Grey is replicated, alpha
/// dropped, 16-bit reduced to 8.
Tensor read_png(const std::string& path);

/// Writes 8-bit RGB with round(255 * clamp(v, 0, 1)).
void write_png(const std::string& path, const Tensor& image);

std::uint8_t to_8bit(float v);

/// Values clamped to [0, 1].
Tensor clamp01(const Tensor& image);

}  // namespace lsr
