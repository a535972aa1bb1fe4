#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "g2l/optimizer.hpp"
#include "g2l/params.hpp"

namespace g2l {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingSnapshot {
  OptimizerState<float> optimizer;
  std::uint64_t step = 0;

  friend bool operator==(const TrainingSnapshot&, const TrainingSnapshot&) = default;
};

struct Checkpoint {
  ModelParams<float> params;
  std::optional<TrainingSnapshot> training;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Layout: "G2LC", u32 version, u32 field count + config fields
/// (S, P, W, E, H, L, D, mixing scheme), u32 tensor count, then per tensor in
/// declaration order a u32-prefixed name and a u64-prefixed f32 payload,
/// then u32 has_training and, if set, u64 adam step, u64 train step and the
/// two moment buffers (u64-prefixed f32). All integers little-endian.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace g2l
