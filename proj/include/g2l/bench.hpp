#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "g2l/params.hpp"

namespace g2l {

inline constexpr int kMinBenchReps = 5;

struct BenchResult {
  std::string label;
  int reps = 0;
  double median_us = 0;
  /// Feature-grid cells processed per second at the median time.
  double cells_per_sec = 0;
};

/// Gather-based G2L window assembly versus permute-once compactification on
/// the same random M^D x E grid. Both outputs are checked bit-identical before
/// timing. Returns {gather, compactified}.
std::vector<BenchResult> bench_permute(int grid_side, int window_len, int dims, int embed, int reps,
                                       std::uint64_t seed = 0);

/// One attention sub-block under W-MSA, SW-MSA and G2L-MSA (compactified) on
/// the same input. The compactified G2L output is checked against the gathered
/// one (1e-6 relative) before timing. Returns {w-msa, sw-msa, g2l-msa}; sw-msa
/// only when W >= 2. `threads` > 1 times the parallel window path.
std::vector<BenchResult> bench_attention_layer(const ModelConfig& cfg, int reps, std::uint64_t seed = 0,
                                               int threads = 1);

/// Columns: scenario, reps, median_us, cells_per_sec.
std::string format_bench_table(std::span<const BenchResult> results);

}  // namespace g2l
