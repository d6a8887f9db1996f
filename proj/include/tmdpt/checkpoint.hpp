#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmdpt/tensor.hpp"

namespace tmdpt {

// Named tensors in the "TMDP" container:
//   magic "TMDP", u32 version (1), u32 tensor count, then per tensor
//   u16 name length, name bytes, u8 rank, u32 dims[rank], little-endian f64 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<std::uint8_t> encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace tmdpt
