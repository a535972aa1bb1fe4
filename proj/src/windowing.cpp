#include "g2l/windowing.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace g2l {

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Decomposes a row-major index (axis 0 fastest) into per-axis coordinates.
std::array<int, 3> coords_of(std::size_t index, int side, int dims) {
  std::array<int, 3> c{0, 0, 0};
  for (int d = 0; d < dims; ++d) {
    c[d] = static_cast<int>(index % side);
    index /= side;
  }
  return c;
}

std::size_t index_of(const std::array<int, 3>& c, int side, int dims) {
  std::size_t idx = 0;
  for (int d = dims - 1; d >= 0; --d) idx = idx * side + c[d];
  return idx;
}

PermutationTable table_from_forward(std::vector<std::uint32_t> forward) {
  PermutationTable t;
  t.inverse.assign(forward.size(), 0);
  for (std::size_t i = 0; i < forward.size(); ++i) t.inverse[forward[i]] = static_cast<std::uint32_t>(i);
  t.forward = std::move(forward);
  return t;
}

}  // namespace

std::string_view scheme_name(WindowScheme s) {
  switch (s) {
    case WindowScheme::w_msa: return "w-msa";
    case WindowScheme::sw_msa: return "sw-msa";
    case WindowScheme::g2l: return "g2l-msa";
  }
  return "unknown";
}

WindowScheme parse_scheme(std::string_view name) {
  if (name == "w" || name == "w-msa") return WindowScheme::w_msa;
  if (name == "sw" || name == "sw-msa") return WindowScheme::sw_msa;
  if (name == "g2l" || name == "g2l-msa") return WindowScheme::g2l;
  throw PreconditionError("unknown window scheme '" + std::string(name) + "' (expected w, sw or g2l)");
}

int WindowIdMap::window_count() const {
  return static_cast<int>(ipow(static_cast<std::size_t>(grid_side / window_len), dims));
}

int WindowIdMap::window_volume() const { return static_cast<int>(ipow(window_len, dims)); }

bool PermutationTable::is_identity() const {
  for (std::size_t i = 0; i < forward.size(); ++i)
    if (forward[i] != i) return false;
  return true;
}

PermutationTable PermutationTable::compose(const PermutationTable& first, const PermutationTable& second) {
  if (first.size() != second.size()) throw PreconditionError("cannot compose permutations of different sizes");
  std::vector<std::uint32_t> forward(first.size());
  for (std::size_t i = 0; i < forward.size(); ++i) forward[i] = second.forward[first.forward[i]];
  return table_from_forward(std::move(forward));
}

void check_window_config(int grid_side, int window_len, int dims) {
  if (dims < 1 || dims > 3) {
    throw PreconditionError("window dimensionality D must be 1, 2 or 3, got " + std::to_string(dims));
  }
  if (grid_side < 1 || window_len < 1 || grid_side % window_len != 0) {
    std::ostringstream msg;
    msg << "window length W=" << window_len << " must divide grid side M=" << grid_side;
    throw PreconditionError(msg.str());
  }
}

WindowIdMap w_msa_ids(int grid_side, int window_len, int dims) {
  check_window_config(grid_side, window_len, dims);
  const int per_axis = grid_side / window_len;
  WindowIdMap map{dims, grid_side, window_len, std::vector<int>(ipow(grid_side, dims))};
  for (std::size_t i = 0; i < map.ids.size(); ++i) {
    auto c = coords_of(i, grid_side, dims);
    for (int d = 0; d < dims; ++d) c[d] /= window_len;
    map.ids[i] = static_cast<int>(index_of(c, per_axis, dims));
  }
  return map;
}

WindowIdMap sw_msa_ids(int grid_side, int window_len, int dims) {
  check_window_config(grid_side, window_len, dims);
  if (window_len < 2) throw PreconditionError("shifted windows need W >= 2");
  const WindowIdMap base = w_msa_ids(grid_side, window_len, dims);
  const int shift = window_len / 2;
  WindowIdMap map = base;
  for (std::size_t i = 0; i < map.ids.size(); ++i) {
    auto c = coords_of(i, grid_side, dims);
    for (int d = 0; d < dims; ++d) c[d] = (c[d] + shift) % grid_side;
    map.ids[i] = base.ids[index_of(c, grid_side, dims)];
  }
  return map;
}

PermutationTable g2l_permutation(int grid_side, int window_len, int dims) {
  check_window_config(grid_side, window_len, dims);
  const int blocks = grid_side / window_len;
  std::vector<std::uint32_t> forward(ipow(grid_side, dims));
  for (std::size_t i = 0; i < forward.size(); ++i) {
    auto c = coords_of(i, grid_side, dims);
    for (int d = 0; d < dims; ++d) c[d] = (c[d] % window_len) * blocks + c[d] / window_len;
    forward[i] = static_cast<std::uint32_t>(index_of(c, grid_side, dims));
  }
  return table_from_forward(std::move(forward));
}

PermutationTable invert_g2l(int grid_side, int window_len, int dims) {
  check_window_config(grid_side, window_len, dims);
  return g2l_permutation(grid_side, grid_side / window_len, dims);
}

WindowIdMap g2l_ids(int grid_side, int window_len, int dims) {
  WindowIdMap base = w_msa_ids(grid_side, window_len, dims);
  const auto perm = g2l_permutation(grid_side, window_len, dims);
  base.ids = permute_values<int>(base.ids, perm);
  return base;
}

WindowIdMap window_ids(WindowScheme scheme, int grid_side, int window_len, int dims) {
  switch (scheme) {
    case WindowScheme::w_msa: return w_msa_ids(grid_side, window_len, dims);
    case WindowScheme::sw_msa: return sw_msa_ids(grid_side, window_len, dims);
    case WindowScheme::g2l: return g2l_ids(grid_side, window_len, dims);
  }
  throw PreconditionError("unknown window scheme");
}

WindowPartition make_partition(const WindowIdMap& ids) {
  check_window_config(ids.grid_side, ids.window_len, ids.dims);
  if (ids.ids.size() != ipow(ids.grid_side, ids.dims))
    throw PreconditionError("window id map length does not match M^D");
  WindowPartition p;
  p.dims = ids.dims;
  p.window_len = ids.window_len;
  p.window_count = ids.window_count();
  p.window_volume = ids.window_volume();
  p.cells.assign(ids.ids.size(), 0);
  std::vector<int> fill(static_cast<std::size_t>(p.window_count), 0);
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    const int w = ids.ids[i];
    if (w < 0 || w >= p.window_count)
      throw PreconditionError("window id " + std::to_string(w) + " out of range");
    if (fill[w] == p.window_volume)
      throw PreconditionError("window " + std::to_string(w) + " holds more than W^D cells");
    p.cells[static_cast<std::size_t>(w) * p.window_volume + fill[w]++] = static_cast<std::uint32_t>(i);
  }
  return p;
}

std::vector<int> relative_offset_index(int window_len, int dims) {
  const int n = static_cast<int>(ipow(window_len, dims));
  const int span = 2 * window_len - 1;
  std::vector<int> table(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const auto ci = coords_of(i, window_len, dims);
    for (int j = 0; j < n; ++j) {
      const auto cj = coords_of(j, window_len, dims);
      std::array<int, 3> off{0, 0, 0};
      for (int d = 0; d < dims; ++d) off[d] = ci[d] - cj[d] + window_len - 1;
      table[static_cast<std::size_t>(i) * n + j] = static_cast<int>(index_of(off, span, dims));
    }
  }
  return table;
}

ReachabilityReport context_reachability(int grid_side, int window_len, int dims,
                                        std::span<const WindowScheme> schedule) {
  check_window_config(grid_side, window_len, dims);
  const std::size_t n = ipow(grid_side, dims);
  const std::size_t words = (n + 63) / 64;
  using Bits = std::vector<std::uint64_t>;

  // Every cell starts by reaching itself.
  std::vector<Bits> reach(n, Bits(words, 0));
  for (std::size_t c = 0; c < n; ++c) reach[c][c / 64] |= std::uint64_t{1} << (c % 64);

  ReachabilityReport report;
  int layer = 0;
  for (WindowScheme scheme : schedule) {
    ++layer;
    const WindowIdMap ids = window_ids(scheme, grid_side, window_len, dims);
    const WindowPartition part = make_partition(ids);
    std::vector<Bits> window_bits(static_cast<std::size_t>(part.window_count), Bits(words, 0));
    for (int w = 0; w < part.window_count; ++w)
      for (std::uint32_t c : part.window(w)) window_bits[w][c / 64] |= std::uint64_t{1} << (c % 64);

    std::vector<char> touched(static_cast<std::size_t>(part.window_count));
    std::vector<std::uint32_t> sizes(n);
    for (std::size_t c = 0; c < n; ++c) {
      std::fill(touched.begin(), touched.end(), 0);
      for (std::size_t w = 0; w < words; ++w) {
        std::uint64_t bits = reach[c][w];
        while (bits) {
          const int b = std::countr_zero(bits);
          bits &= bits - 1;
          touched[ids.ids[w * 64 + b]] = 1;
        }
      }
      Bits next(words, 0);
      for (int w = 0; w < part.window_count; ++w)
        if (touched[w])
          for (std::size_t k = 0; k < words; ++k) next[k] |= window_bits[w][k];
      std::uint32_t count = 0;
      for (auto word : next) count += static_cast<std::uint32_t>(std::popcount(word));
      sizes[c] = count;
      reach[c] = std::move(next);
    }

    LayerReach r;
    r.layer = layer;
    r.scheme = scheme;
    r.min = *std::min_element(sizes.begin(), sizes.end());
    r.max = *std::max_element(sizes.begin(), sizes.end());
    r.mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(n);
    r.global = r.min == n;
    report.layers.push_back(r);
    report.sizes.push_back(std::move(sizes));
  }
  return report;
}

std::string format_reach_line(const LayerReach& r) {
  char mean[32];
  std::snprintf(mean, sizeof mean, "%.3f", r.mean);
  std::ostringstream os;
  os << "layer=" << r.layer << " scheme=" << scheme_name(r.scheme) << " min=" << r.min << " max=" << r.max
     << " mean=" << mean << " global=" << (r.global ? "true" : "false");
  return os.str();
}

}  // namespace g2l
