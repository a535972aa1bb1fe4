#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "g2l/volume.hpp"

namespace g2l {

/// Artifact kinds in the fixed order the Bernoulli process visits them.
enum class ArtifactType { anisotropy, gamma, bias_field, motion, spiking, blur, noise, ghosting };

inline constexpr int kArtifactCount = 8;
inline constexpr std::array<ArtifactType, kArtifactCount> kArtifactOrder = {
    ArtifactType::anisotropy, ArtifactType::gamma, ArtifactType::bias_field, ArtifactType::motion,
    ArtifactType::spiking,    ArtifactType::blur,  ArtifactType::noise,      ArtifactType::ghosting};

std::string_view artifact_tag(ArtifactType t);
ArtifactType parse_artifact_tag(std::string_view tag);

/// Monomials x^i y^j z^k with i + j + k <= 3.
inline constexpr int kBiasFieldTerms = 20;

struct Shift3 {
  int dx = 0, dy = 0, dz = 0;
  friend bool operator==(const Shift3&, const Shift3&) = default;
};

/// Fourier coordinate (each in [0, S)) and phase of one k-space spike.
struct Spike {
  int kx = 0, ky = 0, kz = 0;
  double phase = 0.0;
  friend bool operator==(const Spike&, const Spike&) = default;
};

/// Average-pool by `factor` along `axis`, then linear interpolation back.
Volume apply_anisotropy(const Volume& v, int axis, int factor);
/// Voxelwise v^gamma; requires v in [0, 1].
Volume apply_gamma(const Volume& v, double gamma);
/// Multiplies by exp(Q) with Q a cubic polynomial over [-1, 1]^3.
Volume apply_bias_field(const Volume& v, std::span<const double> coefficients);
/// Splits k-space into n_movements + 1 contiguous bands along `axis` (in
/// centred frequency order). Band 0 keeps the original data; band j takes
/// the k-space of v circularly shifted by shifts[j - 1].
Volume apply_motion(const Volume& v, int n_movements, std::span<const Shift3> shifts, int axis = 2);
/// Scales every period-th non-DC k-space plane along `axis` by (1 - intensity).
Volume apply_ghosting(const Volume& v, int axis, int period, double intensity);
/// Adds Hermitian-paired spikes of modulus magnitude * max|k|.
Volume apply_spiking(const Volume& v, std::span<const Spike> spikes, double magnitude);
/// Separable Gaussian truncated at 3 sigma with symmetric (edge-mirrored) borders.
Volume apply_blur(const Volume& v, double sigma);
Volume apply_noise(const Volume& v, double sigma, std::mt19937_64& rng);
Volume apply_noise(const Volume& v, double sigma, std::uint64_t seed);

/// Min-max rescale to [0, 1]; constant volumes are left unchanged.
Volume renormalize(const Volume& v);

struct AnisotropyParams {
  int axis = 0;
  int factor = 1;
  friend bool operator==(const AnisotropyParams&, const AnisotropyParams&) = default;
};
struct GammaParams {
  double gamma = 1.0;
  friend bool operator==(const GammaParams&, const GammaParams&) = default;
};
struct BiasFieldParams {
  std::vector<double> coefficients;
  friend bool operator==(const BiasFieldParams&, const BiasFieldParams&) = default;
};
struct MotionParams {
  int axis = 2;
  std::vector<Shift3> shifts;
  friend bool operator==(const MotionParams&, const MotionParams&) = default;
};
struct SpikingParams {
  double magnitude = 0.0;
  std::vector<Spike> spikes;
  friend bool operator==(const SpikingParams&, const SpikingParams&) = default;
};
struct BlurParams {
  double sigma = 0.0;
  friend bool operator==(const BlurParams&, const BlurParams&) = default;
};
struct NoiseParams {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};
struct GhostingParams {
  int axis = 0;
  int period = 2;
  double intensity = 0.0;
  friend bool operator==(const GhostingParams&, const GhostingParams&) = default;
};

using ArtifactParams = std::variant<std::monostate, AnisotropyParams, GammaParams, BiasFieldParams, MotionParams,
                                    SpikingParams, BlurParams, NoiseParams, GhostingParams>;

struct ArtifactStep {
  ArtifactType type = ArtifactType::anisotropy;
  bool fired = false;
  ArtifactParams params;
  friend bool operator==(const ArtifactStep&, const ArtifactStep&) = default;
};

/// Everything one run of the Bernoulli process decided; replaying it on the
/// same input reproduces the corrupted volume bit-exactly.
struct ArtifactRecipe {
  std::uint64_t seed = 0;
  std::vector<ArtifactStep> steps;

  int fired_count() const;
  friend bool operator==(const ArtifactRecipe&, const ArtifactRecipe&) = default;
};

/// Sampling ranges for fired artifacts.
struct ArtifactRanges {
  double log_gamma = 0.3;                        // gamma = exp(U(-a, a))
  double blur_sigma_min = 0.5, blur_sigma_max = 1.5;
  double noise_sigma_min = 0.01, noise_sigma_max = 0.1;
  double bias_coefficient = 0.3;                 // U(-a, a)
  std::vector<int> anisotropy_factors = {2, 4};
  double ghost_intensity_min = 0.3, ghost_intensity_max = 1.0;
  int spikes_max = 3;
  double spike_magnitude_min = 0.05, spike_magnitude_max = 0.25;
  int movements_max = 3;
  int motion_shift_divisor = 16;                 // |shift| <= S / divisor per axis
};

struct ArtifactConfig {
  std::array<double, kArtifactCount> probabilities;
  ArtifactRanges ranges;
  std::uint64_t seed = 0;

  ArtifactConfig() { probabilities.fill(1.0 / kArtifactCount); }
  void validate() const;
};

/// Flips one coin per artifact type in fixed order and samples parameters
/// for the ones that fire. Pure function of (cfg, side, seed).
ArtifactRecipe sample_recipe(const ArtifactConfig& cfg, int side, std::uint64_t seed);

Volume apply_step(const Volume& v, const ArtifactStep& step);

/// Applies every fired step in order, then renormalizes to [0, 1].
Volume replay(const ArtifactRecipe& recipe, const Volume& v);

std::pair<Volume, ArtifactRecipe> bernoulli_process(const Volume& v, const ArtifactConfig& cfg, std::uint64_t seed);

/// Plain-text recipe: "seed <n>" then one line per artifact,
/// "<tag> <0|1> key=value ...". Floating-point values round-trip exactly.
std::string format_recipe(const ArtifactRecipe& r);
ArtifactRecipe parse_recipe(std::string_view text);
void write_recipe(const ArtifactRecipe& r, const std::filesystem::path& path);
ArtifactRecipe read_recipe(const std::filesystem::path& path);

}  // namespace g2l
