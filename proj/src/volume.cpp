#include "g2l/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "g2l/detail/binary_io.hpp"
#include "g2l/error.hpp"

namespace g2l {

namespace {

constexpr char kVolumeMagic[4] = {'V', 'O', 'L', '1'};
constexpr std::uint8_t kDtypeFloat32 = 0;
constexpr std::size_t kHeaderBytes = 17;

std::size_t cube(int s) { return static_cast<std::size_t>(s) * s * s; }

}  // namespace

Volume::Volume(int side_, float fill) : side(side_), data(cube(side_), fill) {
  if (side_ <= 0) throw PreconditionError("volume side must be positive");
}

Volume::Volume(int side_, std::vector<float> data_) : side(side_), data(std::move(data_)) {
  if (side_ <= 0) throw PreconditionError("volume side must be positive");
  if (data.size() != cube(side_)) {
    std::ostringstream msg;
    msg << "volume data length " << data.size() << " does not equal side^3 = " << cube(side_);
    throw PreconditionError(msg.str());
  }
}

bool Volume::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](float f) { return std::isfinite(f); });
}

std::vector<std::uint32_t> patch_index_map(int side, int patch_len) {
  if (patch_len <= 0 || side <= 0 || side % patch_len != 0) {
    std::ostringstream msg;
    msg << "patch length P=" << patch_len << " must divide volume side S=" << side;
    throw PreconditionError(msg.str());
  }
  const int m = side / patch_len;
  const std::size_t pv = cube(patch_len);
  std::vector<std::uint32_t> map(cube(side));
  for (int c = 0; c < m; ++c)
    for (int b = 0; b < m; ++b)
      for (int a = 0; a < m; ++a) {
        const std::size_t cell = static_cast<std::size_t>(a) + m * (b + static_cast<std::size_t>(m) * c);
        std::size_t local = 0;
        for (int k = 0; k < patch_len; ++k)
          for (int j = 0; j < patch_len; ++j)
            for (int i = 0; i < patch_len; ++i, ++local) {
              const std::size_t x = a * patch_len + i;
              const std::size_t y = b * patch_len + j;
              const std::size_t z = c * patch_len + k;
              map[cell * pv + local] = static_cast<std::uint32_t>(x + side * (y + side * z));
            }
      }
  return map;
}

PatchGrid patchify(const Volume& v, int patch_len) {
  const auto map = patch_index_map(v.side, patch_len);
  PatchGrid g;
  g.grid_side = v.side / patch_len;
  g.patch_len = patch_len;
  g.data.resize(map.size());
  gather_patches<float>(v.data, map, g.data);
  return g;
}

Volume unpatchify(const PatchGrid& g) {
  if (g.grid_side <= 0 || g.patch_len <= 0 || g.data.size() != g.cells() * g.patch_volume())
    throw PreconditionError("malformed patch grid");
  const int side = g.grid_side * g.patch_len;
  const auto map = patch_index_map(side, g.patch_len);
  Volume v(side);
  scatter_patches<float>(g.data, map, v.data);
  return v;
}

Volume generate_phantom(const PhantomSpec& spec) {
  if (spec.side < 8) {
    std::ostringstream msg;
    msg << "phantom side must be >= 8, got " << spec.side;
    throw PreconditionError(msg.str());
  }
  if (spec.n_ellipsoids < 0 || spec.background_order < 0)
    throw PreconditionError("phantom ellipsoid count and background order must be >= 0");

  const int s = spec.side;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Blob {
    double center[3];
    double radius[3];
    double amplitude;
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(spec.n_ellipsoids));
  for (auto& b : blobs) {
    for (double& c : b.center) c = (0.2 + 0.6 * unit(rng)) * s;
    for (double& r : b.radius) r = (0.08 + 0.22 * unit(rng)) * s;
    b.amplitude = 0.3 + 0.7 * unit(rng);
  }

  struct Term {
    int px, py, pz;
    double coeff;
  };
  std::vector<Term> background;
  for (int total = 0; total <= spec.background_order; ++total)
    for (int pz = 0; pz <= total; ++pz)
      for (int py = 0; py <= total - pz; ++py) {
        const int px = total - pz - py;
        const double scale = total == 0 ? 0.2 : 0.1;
        background.push_back({px, py, pz, scale * (2.0 * unit(rng) - 1.0)});
      }

  std::vector<double> field(cube(s));
  const double norm = s > 1 ? 2.0 / (s - 1) : 0.0;
  std::size_t idx = 0;
  for (int z = 0; z < s; ++z)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x, ++idx) {
        double value = 0.0;
        for (const auto& b : blobs) {
          const double dx = (x - b.center[0]) / b.radius[0];
          const double dy = (y - b.center[1]) / b.radius[1];
          const double dz = (z - b.center[2]) / b.radius[2];
          value += b.amplitude * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
        }
        const double u = x * norm - 1.0, v = y * norm - 1.0, w = z * norm - 1.0;
        for (const auto& t : background)
          value += t.coeff * std::pow(u, t.px) * std::pow(v, t.py) * std::pow(w, t.pz);
        field[idx] = value;
      }

  const auto [lo_it, hi_it] = std::minmax_element(field.begin(), field.end());
  const double lo = *lo_it, hi = *hi_it;
  Volume out(s);
  if (hi - lo < 1e-12) {
    std::fill(out.data.begin(), out.data.end(), static_cast<float>(std::clamp(lo, 0.0, 1.0)));
    return out;
  }
  for (std::size_t i = 0; i < field.size(); ++i)
    out.data[i] = static_cast<float>((field[i] - lo) / (hi - lo));
  return out;
}

void write_volume(const Volume& v, const std::filesystem::path& path) {
  if (v.data.size() != cube(v.side)) throw PreconditionError("volume data length does not equal side^3");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kVolumeMagic, 4);
  for (int i = 0; i < 3; ++i) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v.side));
  detail::write_le<std::uint8_t>(os, kDtypeFloat32);
  detail::write_floats(os, v.data);
  if (!os) throw IoError("write failed: " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::size_t>(is.tellg());
  is.seekg(0, std::ios::beg);

  char magic[4] = {};
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kVolumeMagic))
    throw FormatError(FormatErrorKind::bad_magic, "bad magic in " + path.string());
  std::uint32_t dims[3] = {};
  std::uint8_t dtype = 0;
  for (auto& d : dims)
    if (!detail::read_le(is, d))
      throw FormatError(FormatErrorKind::payload_length_mismatch,
                        "payload length mismatch: truncated header in " + path.string());
  if (!detail::read_le(is, dtype))
    throw FormatError(FormatErrorKind::payload_length_mismatch,
                      "payload length mismatch: truncated header in " + path.string());
  if (dtype != kDtypeFloat32)
    throw FormatError(FormatErrorKind::unsupported_dtype,
                      "unsupported dtype code " + std::to_string(dtype) + " in " + path.string());

  const std::size_t voxels = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (file_size != kHeaderBytes + voxels * sizeof(float)) {
    std::ostringstream msg;
    msg << "payload length mismatch in " << path.string() << ": dims " << dims[0] << "x" << dims[1]
        << "x" << dims[2] << " need " << voxels * sizeof(float) << " bytes, file has "
        << (file_size >= kHeaderBytes ? file_size - kHeaderBytes : 0);
    throw FormatError(FormatErrorKind::payload_length_mismatch, msg.str());
  }
  if (dims[0] != dims[1] || dims[1] != dims[2] || dims[0] == 0)
    throw FormatError(FormatErrorKind::unsupported_shape,
                      "only non-empty cubic volumes are supported: " + path.string());

  Volume v(static_cast<int>(dims[0]));
  if (!detail::read_floats(is, v.data))
    throw FormatError(FormatErrorKind::payload_length_mismatch, "payload length mismatch in " + path.string());
  return v;
}

}  // namespace g2l
