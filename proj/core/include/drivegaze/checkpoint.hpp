#pragma once

// Checkpoint file: one float32 DRVT container whose rank-1 payload holds
// every parameter back to back, followed by a name-index trailer:
//
//   "DRVI" | version u32 | arch tag (u32 len + bytes) | input size u64 |
//   channel divisor u64 | refine resolution u64 | entry count u32 |
//   entries: name, rank u32, extents u64..., byte offset u64 |
//   has_optimizer u32 [ step u64 | m container (f64) | v container (f64) ]

#include <filesystem>
#include <optional>

#include "drivegaze/net.hpp"
#include "drivegaze/training.hpp"

namespace drivegaze {

struct Checkpoint {
  ModelParams params;
  std::optional<Optimizer> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Optimizer* optimizer = nullptr);

/// Reads and validates a checkpoint against the schedule implied by its own
/// header. Throws FormatError on malformed or truncated files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally rejects a checkpoint whose configuration
/// differs from `expected` (architecture tag, input size, channels, R).
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetConfig& expected);

}  // namespace drivegaze
