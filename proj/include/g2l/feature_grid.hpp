#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace g2l {

/// grid_side^dims lattice of embed_dim-long feature vectors, cells in
/// row-major order with the first axis fastest.
template <class T>
struct FeatureGrid {
  int dims = 3;
  int grid_side = 0;
  int embed_dim = 0;
  std::vector<T> data;

  FeatureGrid() = default;
  FeatureGrid(int dims_, int grid_side_, int embed_dim_)
      : dims(dims_), grid_side(grid_side_), embed_dim(embed_dim_),
        data(cell_count(dims_, grid_side_) * static_cast<std::size_t>(embed_dim_), T(0)) {}

  static std::size_t cell_count(int dims, int side) {
    std::size_t n = 1;
    for (int d = 0; d < dims; ++d) n *= static_cast<std::size_t>(side);
    return n;
  }

  std::size_t cells() const { return cell_count(dims, grid_side); }
  std::span<T> cell(std::size_t i) {
    return std::span<T>(data).subspan(i * embed_dim, embed_dim);
  }
  std::span<const T> cell(std::size_t i) const {
    return std::span<const T>(data).subspan(i * embed_dim, embed_dim);
  }

  bool same_shape(const FeatureGrid& o) const {
    return dims == o.dims && grid_side == o.grid_side && embed_dim == o.embed_dim;
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

}  // namespace g2l
