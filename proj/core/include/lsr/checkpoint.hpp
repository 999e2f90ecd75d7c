// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout:
//   8 bytes   magic "LSRCKPT\0"
//   4 bytes   format version (little-endian u32)
//   8 bytes   header length in bytes (little-endian u64)
//   header    JSON: format_version, config, fused, structure tags of every
//             rep kernel, tensor index (name, shape, offset, count)
//   payload   little-endian float32 values in index order
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsr/network.hpp"

namespace lsr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(Model<float>& model);
Model<float> deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

/// Copies every tensor whose name and shape match from the checkpoint into
/// `model`; returns the number of tensors copied.
std::size_t load_compatible(Model<float>& model, const std::string& path);

}  // namespace lsr
