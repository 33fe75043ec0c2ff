#pragma once

// Binary checkpoint format, all integers little-endian:
//
//   "SQLN"  u32 version  u8 scalar_bytes (4 or 8)
//   u32 input_rank  u64 dims...
//   u32 layer_count, per layer: u8 kind, u32 field_count, u64 fields...
//   u32 tensor_count, per tensor: u32 rank, u64 dims..., raw IEEE-754 payload
//   u8 optimizer_present [u8 kind, u32 count, tensor records...]
//   u64 step
//
// Parameter tensors are stored in layer order, weight then bias.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seqlearn/fileio.hpp"
#include "seqlearn/model.hpp"

namespace seqlearn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
std::vector<std::uint8_t> checkpoint_encode(const ModelState<T>& model);

// Throws ParseError (byte offset) on bad magic, version, truncation or shape mismatch.
template <class T>
ModelState<T> checkpoint_decode(const std::vector<std::uint8_t>& bytes);

template <class T>
void checkpoint_save(const ModelState<T>& model, const std::filesystem::path& path);

template <class T>
ModelState<T> checkpoint_load(const std::filesystem::path& path);

} // namespace seqlearn
