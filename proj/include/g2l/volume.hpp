#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace g2l {

/// Cubic scalar field of side S, voxels stored row-major with x fastest:
/// index(x, y, z) = x + S * (y + S * z).
struct Volume {
  int side = 0;
  std::vector<float> data;

  Volume() = default;
  explicit Volume(int side, float fill = 0.0f);
  Volume(int side, std::vector<float> data);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(side) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(side) * z);
  }
  float& at(int x, int y, int z) noexcept { return data[index(x, y, z)]; }
  float at(int x, int y, int z) const noexcept { return data[index(x, y, z)]; }

  bool all_finite() const noexcept;

  friend bool operator==(const Volume&, const Volume&) = default;
};

/// M^3 cells of flattened P^3 patches. Cell (a, b, c) sits at a + M * (b + M * c)
/// and holds the sub-block with origin (aP, bP, cP), flattened x fastest.
struct PatchGrid {
  int grid_side = 0;
  int patch_len = 0;
  std::vector<float> data;

  std::size_t cells() const noexcept {
    return static_cast<std::size_t>(grid_side) * grid_side * grid_side;
  }
  std::size_t patch_volume() const noexcept {
    return static_cast<std::size_t>(patch_len) * patch_len * patch_len;
  }
  std::span<const float> patch(std::size_t cell) const {
    return std::span<const float>(data).subspan(cell * patch_volume(), patch_volume());
  }

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

/// Maps every position of the patch-major layout (cell * P^3 + local) to its
/// voxel index. The map is a bijection on [0, S^3).
std::vector<std::uint32_t> patch_index_map(int side, int patch_len);

PatchGrid patchify(const Volume& v, int patch_len);
Volume unpatchify(const PatchGrid& g);

/// Generic gather/scatter through patch_index_map, used by the model for
/// non-float scalar types.
template <class T>
void gather_patches(std::span<const T> voxels, std::span<const std::uint32_t> map,
                    std::span<T> patches) {
  for (std::size_t i = 0; i < map.size(); ++i) patches[i] = voxels[map[i]];
}

template <class T>
void scatter_patches(std::span<const T> patches, std::span<const std::uint32_t> map,
                     std::span<T> voxels) {
  for (std::size_t i = 0; i < map.size(); ++i) voxels[map[i]] = patches[i];
}

struct PhantomSpec {
  std::uint64_t seed = 0;
  int side = 32;
  int n_ellipsoids = 4;
  int background_order = 2;
};

/// Sum of Gaussian-falloff ellipsoids plus a polynomial background, min-max
/// rescaled to [0, 1]. Pure function of `spec`.
Volume generate_phantom(const PhantomSpec& spec);

/// VOL1 format: "VOL1", three u32 LE dims, u8 dtype (0 = f32 LE), raw voxels.
void write_volume(const Volume& v, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);

}  // namespace g2l
