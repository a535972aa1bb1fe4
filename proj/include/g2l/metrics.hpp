#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "g2l/volume.hpp"

namespace g2l {

/// PSNR returned for identical inputs (and the upper bound of any PSNR).
inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 7;

/// 10 log10(1 / MSE), peak 1.0 for normalized volumes.
double psnr(const Volume& ref, const Volume& test);

/// Mean local SSIM over uniform 7^3 windows centred on every voxel, mirrored
/// borders, C1 = 0.01^2, C2 = 0.03^2, dynamic range 1.
double ssim3(const Volume& ref, const Volume& test);

struct BinaryMask {
  int side = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  explicit BinaryMask(int side_) : side(side_), data(static_cast<std::size_t>(side_) * side_ * side_, 0) {}
  std::size_t count() const;
};

/// 2|a & b| / (|a| + |b|); two empty masks score 1.
double dice(const BinaryMask& a, const BinaryMask& b);

/// dice(hf, rac) - dice(hf, bap); positive when correction helped.
double dice_delta(const BinaryMask& hf, const BinaryMask& bap, const BinaryMask& rac);

/// Foreground mask from Otsu's threshold over a 256-bin histogram.
BinaryMask otsu_mask(const Volume& v);

/// Masks on disk reuse the VOL1 container: nonzero voxels are foreground.
BinaryMask read_mask(const std::filesystem::path& path);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> dice_delta;
};

MetricReport evaluate(const Volume& ref, const Volume& test);

/// "psnr=<x> ssim=<x>[ dice_delta=<x>]"
std::string format_report(const MetricReport& r);

}  // namespace g2l
