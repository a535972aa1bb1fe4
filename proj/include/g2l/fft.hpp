#pragma once

#include <complex>
#include <span>
#include <vector>

#include "g2l/volume.hpp"

namespace g2l {

using Complex = std::complex<double>;

/// S^3 Fourier coefficients in the same x-fastest order as Volume.
struct KSpace {
  int side = 0;
  std::vector<Complex> data;

  std::size_t index(int kx, int ky, int kz) const {
    return static_cast<std::size_t>(kx) + static_cast<std::size_t>(side) * (ky + static_cast<std::size_t>(side) * kz);
  }
};

bool is_power_of_two(int n);

/// In-place 1D transform. Radix-2 when the length is a power of two,
/// direct O(n^2) summation otherwise. Unnormalized in both directions.
void fft_inplace(std::span<Complex> a, bool inverse);

/// Unnormalized forward 3D transform.
KSpace dft3(std::span<const double> voxels, int side);
KSpace dft3(const Volume& v);

/// 1/S^3-normalized inverse 3D transform.
std::vector<Complex> idft3_complex(const KSpace& k);
/// Real part of the inverse transform.
Volume idft3(const KSpace& k);

}  // namespace g2l
