#include "g2l/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "g2l/error.hpp"
#include "g2l/model.hpp"
#include "g2l/windowing.hpp"

namespace g2l {

namespace {

// Keeps the optimiser from discarding benchmarked work.
volatile float g_sink = 0;

template <class F>
BenchResult time_scenario(std::string label, int reps, std::size_t cells, F&& fn) {
  fn();  // warm-up, discarded
  std::vector<double> us(static_cast<std::size_t>(reps));
  for (auto& t : us) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  }
  std::sort(us.begin(), us.end());
  const std::size_t n = us.size();
  const double median = n % 2 ? us[n / 2] : 0.5 * (us[n / 2 - 1] + us[n / 2]);
  const double rate = static_cast<double>(cells) / (std::max(median, 1e-3) * 1e-6);
  return {std::move(label), reps, median, rate};
}

void check_reps(int reps) {
  if (reps < kMinBenchReps)
    throw PreconditionError("reps must be >= " + std::to_string(kMinBenchReps) + ", got " + std::to_string(reps));
}

FeatureGrid<float> random_grid(int dims, int side, int embed, std::uint64_t seed) {
  FeatureGrid<float> g(dims, side, embed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : g.data) v = u(rng);
  return g;
}

}  // namespace

std::vector<BenchResult> bench_permute(int grid_side, int window_len, int dims, int embed, int reps,
                                       std::uint64_t seed) {
  check_reps(reps);
  check_window_config(grid_side, window_len, dims);
  if (embed < 1) throw PreconditionError("embed must be >= 1");

  const auto grid = random_grid(dims, grid_side, embed, seed);
  const auto partition = make_partition(g2l_ids(grid_side, window_len, dims));
  const auto table = invert_g2l(grid_side, window_len, dims);
  const auto E = static_cast<std::size_t>(embed);

  std::vector<float> gathered(grid.data.size());
  auto gather = [&] {
    float* dst = gathered.data();
    for (std::uint32_t c : partition.cells) {
      const float* src = grid.data.data() + c * E;
      std::copy(src, src + E, dst);
      dst += E;
    }
    g_sink = gathered[0];
  };
  std::vector<float> compact(grid.data.size());
  auto compactified = [&] {
    compactify_into<float>(grid.data, E, table, compact);
    g_sink = compact[0];
  };

  // The compactified grid must hold window k's cells in W-aligned block k,
  // in the same order the gather visits them.
  gather();
  compactified();
  const auto local = make_partition(w_msa_ids(grid_side, window_len, dims));
  for (std::size_t i = 0; i < local.cells.size(); ++i)
    if (!std::equal(gathered.begin() + static_cast<std::ptrdiff_t>(i * E),
                    gathered.begin() + static_cast<std::ptrdiff_t>((i + 1) * E),
                    compact.begin() + static_cast<std::ptrdiff_t>(local.cells[i] * E)))
      throw std::logic_error("bench_permute: gather and compactified assembly disagree");

  const std::size_t cells = grid.cells();
  return {time_scenario("permute/gather", reps, cells, gather),
          time_scenario("permute/compactified", reps, cells, compactified)};
}

std::vector<BenchResult> bench_attention_layer(const ModelConfig& cfg, int reps, std::uint64_t seed, int threads) {
  check_reps(reps);
  cfg.validate();
  const int M = cfg.grid();
  const auto layer = init_layer<float>(cfg.embed, cfg.heads, cfg.window, cfg.dims, seed);
  const auto attn = layer.view().attn;
  const auto x = random_grid(cfg.dims, M, cfg.embed, seed + 1);

  const auto w_ids = w_msa_ids(M, cfg.window, cfg.dims);
  const auto g_ids = g2l_ids(M, cfg.window, cfg.dims);
  const bool has_sw = cfg.window >= 2;
  const auto sw_ids = has_sw ? sw_msa_ids(M, cfg.window, cfg.dims) : w_ids;

  const auto gathered = window_attention<float>(x, g_ids, attn);
  const auto compact = g2l_attention_compactified<float>(x, cfg.window, attn);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < gathered.data.size(); ++i) {
    num = std::max(num, std::abs(static_cast<double>(gathered.data[i]) - compact.data[i]));
    den = std::max(den, std::abs(static_cast<double>(gathered.data[i])));
  }
  if (num > 1e-6 * std::max(den, 1e-30))
    throw std::logic_error("bench_attention_layer: compactified and gathered G2L attention disagree");
  if (threads > 1 && !(window_attention<float>(x, g_ids, attn, threads) == gathered))
    throw std::logic_error("bench_attention_layer: parallel window path is not bit-identical");

  const std::size_t cells = x.cells();
  std::vector<BenchResult> out;
  out.push_back(time_scenario("attention/w-msa", reps, cells,
                              [&] { g_sink = window_attention<float>(x, w_ids, attn, threads).data[0]; }));
  if (has_sw)
    out.push_back(time_scenario("attention/sw-msa", reps, cells,
                                [&] { g_sink = window_attention<float>(x, sw_ids, attn, threads).data[0]; }));
  out.push_back(time_scenario("attention/g2l-msa", reps, cells,
                              [&] { g_sink = g2l_attention_compactified<float>(x, cfg.window, attn, threads).data[0]; }));
  return out;
}

std::string format_bench_table(std::span<const BenchResult> results) {
  std::string out = "scenario                   reps    median_us      cells/s\n";
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-24s %6d %12.1f %12.4g\n", r.label.c_str(), r.reps, r.median_us, r.cells_per_sec);
    out += buf;
  }
  return out;
}

}  // namespace g2l
