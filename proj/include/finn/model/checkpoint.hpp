#pragma once

#include <cstdint>
#include <filesystem>

#include "finn/model/mlp.hpp"

namespace finn {

/// Checkpoint layout (all integers and floats little-endian):
///   magic "FINNCKPT" | u32 version | u32 tensor count
///   per tensor: u32 name length, name bytes, u32 rows, u32 cols
///   meta: u64 seed, u32 epoch, process tag, loss tag, option kind tag
///         (tags as u32 length + bytes)
///   u64 value count | f64 values (flat parameter order)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);

/// Throws FormatError naming the offending field on version or shape
/// mismatch, truncation, or trailing bytes.
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace finn
