#include "g2l/fft.hpp"

#include <cmath>
#include <numbers>

#include "g2l/error.hpp"

namespace g2l {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

void radix2(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly per k to avoid accumulated rounding.
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const Complex w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const Complex u = a[start + k];
        const Complex t = w * a[start + k + half];
        a[start + k] = u + t;
        a[start + k + half] = u - t;
      }
    }
  }
}

void direct(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<Complex> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Complex s = 0;
    for (std::size_t x = 0; x < n; ++x) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((k * x) % n) / static_cast<double>(n);
      s += a[x] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = s;
  }
  std::copy(out.begin(), out.end(), a.begin());
}

void transform3(std::vector<Complex>& data, int side, bool inverse) {
  const std::size_t s = side;
  std::vector<Complex> line(s);
  const std::size_t strides[3] = {1, s, s * s};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t stride = strides[axis];
    for (std::size_t outer = 0; outer < s * s; ++outer) {
      // Base index of the line: the two non-transformed coordinates.
      const std::size_t a = outer % s, b = outer / s;
      std::size_t base = 0;
      if (axis == 0) base = a * s + b * s * s;
      if (axis == 1) base = a + b * s * s;
      if (axis == 2) base = a + b * s;
      for (std::size_t i = 0; i < s; ++i) line[i] = data[base + i * stride];
      fft_inplace(line, inverse);
      for (std::size_t i = 0; i < s; ++i) data[base + i * stride] = line[i];
    }
  }
}

}  // namespace

void fft_inplace(std::span<Complex> a, bool inverse) {
  if (a.empty()) return;
  if (is_power_of_two(static_cast<int>(a.size())))
    radix2(a, inverse);
  else
    direct(a, inverse);
}

KSpace dft3(std::span<const double> voxels, int side) {
  if (side <= 0 || voxels.size() != static_cast<std::size_t>(side) * side * side)
    throw PreconditionError("dft3: voxel count does not equal side^3");
  KSpace k{side, std::vector<Complex>(voxels.begin(), voxels.end())};
  transform3(k.data, side, false);
  return k;
}

KSpace dft3(const Volume& v) {
  std::vector<double> d(v.data.begin(), v.data.end());
  return dft3(d, v.side);
}

std::vector<Complex> idft3_complex(const KSpace& k) {
  std::vector<Complex> d = k.data;
  transform3(d, k.side, true);
  const double scale = 1.0 / static_cast<double>(d.size());
  for (auto& c : d) c *= scale;
  return d;
}

Volume idft3(const KSpace& k) {
  const auto d = idft3_complex(k);
  Volume v(k.side);
  for (std::size_t i = 0; i < d.size(); ++i) v.data[i] = static_cast<float>(d[i].real());
  return v;
}

}  // namespace g2l
