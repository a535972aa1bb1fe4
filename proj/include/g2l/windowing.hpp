#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "g2l/error.hpp"
#include "g2l/feature_grid.hpp"

namespace g2l {

enum class WindowScheme { w_msa, sw_msa, g2l };

std::string_view scheme_name(WindowScheme s);
/// Accepts "w", "w-msa", "sw", "sw-msa", "g2l", "g2l-msa" (case-sensitive).
WindowScheme parse_scheme(std::string_view name);

/// Assigns every cell of an M^D lattice a 0-based window identifier. Every
/// valid map partitions the lattice into (M/W)^D windows of W^D cells.
struct WindowIdMap {
  int dims = 0;
  int grid_side = 0;
  int window_len = 0;
  std::vector<int> ids;

  std::size_t cells() const { return ids.size(); }
  int window_count() const;
  int window_volume() const;

  friend bool operator==(const WindowIdMap&, const WindowIdMap&) = default;
};

/// Bijection on [0, M^D): value at source index i moves to forward[i].
struct PermutationTable {
  std::vector<std::uint32_t> forward;
  std::vector<std::uint32_t> inverse;

  std::size_t size() const { return forward.size(); }
  bool is_identity() const;
  /// Table equal to applying `first`, then `second`.
  static PermutationTable compose(const PermutationTable& first, const PermutationTable& second);

  friend bool operator==(const PermutationTable&, const PermutationTable&) = default;
};

/// Throws PreconditionError unless D in {1,2,3}, M >= 1 and W divides M.
void check_window_config(int grid_side, int window_len, int dims);

WindowIdMap w_msa_ids(int grid_side, int window_len, int dims);
/// W-MSA ids of the lattice cyclically shifted by floor(W/2) on every axis;
/// windows wrap around the lattice boundary.
WindowIdMap sw_msa_ids(int grid_side, int window_len, int dims);
WindowIdMap g2l_ids(int grid_side, int window_len, int dims);
WindowIdMap window_ids(WindowScheme scheme, int grid_side, int window_len, int dims);

/// Per axis, splits the coordinate into (block, local) with W-sized blocks
/// and swaps the pair, so coordinate c moves to (c % W) * (M / W) + c / W.
PermutationTable g2l_permutation(int grid_side, int window_len, int dims);
/// The inverse of g2l_permutation(M, W, D), which is g2l_permutation(M, M / W, D).
PermutationTable invert_g2l(int grid_side, int window_len, int dims);

template <class T>
std::vector<T> permute_values(std::span<const T> values, const PermutationTable& t) {
  if (values.size() != t.size()) throw PreconditionError("permutation table size does not match value count");
  std::vector<T> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[t.forward[i]] = values[i];
  return out;
}

/// Relocates whole feature vectors: cell i moves to t.forward[i].
template <class T>
void compactify_into(std::span<const T> x, std::size_t width, const PermutationTable& t, std::span<T> out) {
  if (x.size() != t.size() * width || out.size() != x.size())
    throw PreconditionError("compactify: permutation table size does not match grid cell count");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const T* src = x.data() + i * width;
    T* dst = out.data() + static_cast<std::size_t>(t.forward[i]) * width;
    for (std::size_t e = 0; e < width; ++e) dst[e] = src[e];
  }
}

/// Inverse relocation of compactify_into: cell t.forward[i] moves back to i.
template <class T>
void decompactify_into(std::span<const T> x, std::size_t width, const PermutationTable& t, std::span<T> out) {
  if (x.size() != t.size() * width || out.size() != x.size())
    throw PreconditionError("decompactify: permutation table size does not match grid cell count");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const T* src = x.data() + static_cast<std::size_t>(t.forward[i]) * width;
    T* dst = out.data() + i * width;
    for (std::size_t e = 0; e < width; ++e) dst[e] = src[e];
  }
}

template <class T>
FeatureGrid<T> compactify(const FeatureGrid<T>& x, const PermutationTable& t) {
  FeatureGrid<T> out = x;
  compactify_into<T>(x.data, x.embed_dim, t, out.data);
  return out;
}

template <class T>
FeatureGrid<T> decompactify(const FeatureGrid<T>& x, const PermutationTable& t) {
  FeatureGrid<T> out = x;
  decompactify_into<T>(x.data, x.embed_dim, t, out.data);
  return out;
}

/// Cells of every window laid out window-major. Within a window the cells
/// follow the canonical gather order (ascending cell index), and the rank of
/// a cell in that order, read as a row-major W^D coordinate, is its
/// window-internal lattice position.
struct WindowPartition {
  int dims = 0;
  int window_len = 0;
  int window_count = 0;
  int window_volume = 0;
  std::vector<std::uint32_t> cells;

  std::span<const std::uint32_t> window(int w) const {
    return std::span<const std::uint32_t>(cells).subspan(
        static_cast<std::size_t>(w) * window_volume, window_volume);
  }
};

/// Validates the id map (every id in range, every window exactly W^D cells)
/// and groups cells by id.
WindowPartition make_partition(const WindowIdMap& ids);

/// Per ordered pair (i, j) of window-internal positions, the index of the
/// relative offset in a (2W-1)^D table; row-major with offsets shifted by W-1.
std::vector<int> relative_offset_index(int window_len, int dims);

struct LayerReach {
  int layer = 0;
  WindowScheme scheme = WindowScheme::w_msa;
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
  bool global = false;
};

struct ReachabilityReport {
  std::vector<LayerReach> layers;
  /// sizes[l][c]: number of cells reachable from cell c after layers 0..l.
  std::vector<std::vector<std::uint32_t>> sizes;
};

/// Layered reachability: after layer l, the set reachable from a cell is the
/// union of all layer-l windows that intersect the set after layer l-1.
ReachabilityReport context_reachability(int grid_side, int window_len, int dims,
                                        std::span<const WindowScheme> schedule);

/// "layer=<n> scheme=<name> min=<n> max=<n> mean=<x> global=<bool>"
std::string format_reach_line(const LayerReach& r);

}  // namespace g2l
