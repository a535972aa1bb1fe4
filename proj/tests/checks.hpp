#pragma once

// Measurements shared by the unit tests and the acceptance binary. Each
// returns the measured quantity; callers apply their own tolerances.

#include <cstdint>
#include <vector>

#include "g2l/autodiff.hpp"
#include "g2l/params.hpp"
#include "g2l/train.hpp"

namespace g2l::check {

/// S=8, P=4, W=2, E=4, H=2, L=2.
ModelConfig tiny_config();

/// Tiny-config parameters with every tensor perturbed off its symmetric
/// initial value, plus a random (input, target) pair in [0, 1].
template <class T>
struct GradientProblem {
  ModelParams<T> params;
  std::vector<T> input;
  std::vector<T> target;
};
GradientProblem<double> gradient_problem(std::uint64_t seed);

/// Re-draws the target so every residual has magnitude in [margin, 4 margin];
/// keeps finite differences of the absolute loss away from its kink.
void keep_residuals_off_kink(GradientProblem<double>& prob, double margin);

/// Central difference at step h refined by one Richardson step with h/2,
/// evaluated in double.
double numeric_partial(const GradientProblem<double>& prob, std::size_t coord, double h, LossKind kind);

/// |a - n| / max(|a|, |n|, floor). Gradients that vanish by symmetry (for
/// example a key bias under softmax shift invariance) sit below the floor.
/// The 32-bit floor sits at float rounding of the O(1) gradient scale.
inline constexpr double kGradientFloor = 1e-7;
inline constexpr double kGradientFloorFloat = 1e-5;
double gradient_rel_error(double analytic, double numeric, double floor = kGradientFloor);

struct GradCheck {
  std::size_t coords = 0;
  double max_rel_error = 0;
  std::size_t worst_coord = 0;
};

/// Compares analytic gradients (at precision T) against the double-precision
/// numeric oracle on `coords` (empty: every coordinate).
template <class T>
GradCheck gradient_check(std::uint64_t seed, const std::vector<std::size_t>& coords, double h = 1e-3,
                         LossKind kind = LossKind::squared);

/// `count` distinct coordinates drawn uniformly from [0, n).
std::vector<std::size_t> sample_coords(std::size_t n, std::size_t count, std::uint64_t seed);

/// Tiny-config batch of `n` random pairs in [0, 1].
std::vector<TrainingPair> random_pairs(const ModelConfig& cfg, std::size_t n, std::uint64_t seed);

/// max |accumulated - full| / max |full| with 8 singleton micro-batches in double.
double accumulation_gap(std::uint64_t seed);

struct ProbeSetup {
  std::vector<TrainingPair> pairs;
  double corrupted_psnr = 0;
};

/// Four S=32 phantoms, each corrupted once by the default Bernoulli process
/// using the first seeds (from 0 upward) for which at least one artifact fires.
ProbeSetup probe_pairs(std::uint64_t phantom_seed);

struct ProbeResult {
  double corrupted_psnr = 0;
  double reconstructed_psnr = 0;
  int steps = 0;
};

/// Full-batch training (batch 1 x 4 accumulation over the 4 pairs) until the
/// reconstruction beats the corrupted input by `margin_db` or `max_steps`.
ProbeResult overfit_probe(double learning_rate, int max_steps, double margin_db, int eval_every);

struct BernoulliStats {
  double mean = 0;
  double chi2 = 0;
  int dof = 0;
  std::vector<int> histogram;  // fired count 0..8
};

/// Fired counts of sample_recipe with the default config over `trials` seeds.
BernoulliStats bernoulli_stats(int trials, std::uint64_t base_seed);

/// Upper 1% critical value of the chi-squared distribution.
double chi2_critical_01(int dof);

}  // namespace g2l::check
