#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <type_traits>

#include "g2l/artifacts.hpp"
#include "g2l/metrics.hpp"
#include "g2l/model.hpp"
#include "g2l/parallel.hpp"

namespace g2l::check {

ModelConfig tiny_config() {
  ModelConfig c;
  c.side = 8;
  c.patch = 4;
  c.window = 2;
  c.embed = 4;
  c.heads = 2;
  c.layers = 2;
  return c;
}

GradientProblem<double> gradient_problem(std::uint64_t seed) {
  GradientProblem<double> p{init_params<double>(tiny_config(), seed), {}, {}};
  std::mt19937_64 rng(seed ^ 0x9e37);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& v : p.params.values) v += 0.2 * u(rng);
  const std::size_t n = 8 * 8 * 8;
  for (std::size_t i = 0; i < n; ++i) p.input.push_back(u(rng) + 0.5);
  for (std::size_t i = 0; i < n; ++i) p.target.push_back(u(rng) + 0.5);
  return p;
}

void keep_residuals_off_kink(GradientProblem<double>& prob, double margin) {
  const auto pred = forward_values<double>(prob.input, prob.params, G2LPath::gathered);
  std::mt19937_64 rng(0x11);
  std::uniform_real_distribution<double> u(margin, 4 * margin);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t i = 0; i < pred.size(); ++i) prob.target[i] = pred[i] + (sign(rng) ? u(rng) : -u(rng));
}

double numeric_partial(const GradientProblem<double>& prob, std::size_t coord, double h, LossKind kind) {
  auto params = prob.params;
  const double x0 = params.values[coord];
  auto eval = [&](double x) {
    params.values[coord] = x;
    return loss_value<double>(forward_values<double>(prob.input, params, G2LPath::gathered), prob.target, kind);
  };
  const double d1 = (eval(x0 + h) - eval(x0 - h)) / (2 * h);
  const double d2 = (eval(x0 + h / 2) - eval(x0 - h / 2)) / h;
  return (4 * d2 - d1) / 3;
}

double gradient_rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <class T>
GradCheck gradient_check(std::uint64_t seed, const std::vector<std::size_t>& coords, double h, LossKind kind) {
  auto prob = gradient_problem(seed);
  if (kind == LossKind::absolute) keep_residuals_off_kink(prob, 0.05);
  std::vector<T> analytic;
  if constexpr (std::is_same_v<T, double>) {
    analytic = backward<double>(prob.input, prob.target, prob.params, kind).values;
  } else {
    const auto params = prob.params.template cast<T>();
    const std::vector<T> x(prob.input.begin(), prob.input.end()), y(prob.target.begin(), prob.target.end());
    analytic = backward<T>(x, y, params, kind).values;
  }
  std::vector<std::size_t> all = coords;
  if (all.empty()) {
    all.resize(analytic.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
  }
  GradCheck r;
  r.coords = all.size();
  for (auto c : all) {
    const double floor = std::is_same_v<T, float> ? kGradientFloorFloat : kGradientFloor;
    const double e = gradient_rel_error(analytic[c], numeric_partial(prob, c, h, kind), floor);
    if (e >= r.max_rel_error) {
      r.max_rel_error = e;
      r.worst_coord = c;
    }
  }
  return r;
}

template GradCheck gradient_check<float>(std::uint64_t, const std::vector<std::size_t>&, double, LossKind);
template GradCheck gradient_check<double>(std::uint64_t, const std::vector<std::size_t>&, double, LossKind);

std::vector<std::size_t> sample_coords(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw std::invalid_argument("sample_coords: count exceeds population");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<TrainingPair> random_pairs(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingPair p{Volume(cfg.side), Volume(cfg.side)};
    for (auto& v : p.input.data) v = u(rng);
    for (auto& v : p.target.data) v = u(rng);
    out.push_back(std::move(p));
  }
  return out;
}

double accumulation_gap(std::uint64_t seed) {
  const auto cfg = tiny_config();
  auto params = init_params<double>(cfg, seed);
  const auto pairs = random_pairs(cfg, 8, seed + 1);
  const auto full = batch_gradient<double>(pairs, params, LossKind::squared);
  const auto acc = accumulated_gradient<double>(pairs, params, 8, LossKind::squared);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < full.values.size(); ++i) {
    num = std::max(num, std::abs(acc.values[i] - full.values[i]));
    den = std::max(den, std::abs(full.values[i]));
  }
  return num / den;
}

ProbeSetup probe_pairs(std::uint64_t phantom_seed) {
  ProbeSetup s;
  const ArtifactConfig artifacts;
  std::uint64_t seed = 0;
  for (int i = 0; i < 4; ++i) {
    PhantomSpec spec;
    spec.seed = mix_seed(phantom_seed, static_cast<std::uint64_t>(i));
    spec.side = 32;
    const Volume clean = generate_phantom(spec);
    for (;; ++seed) {
      auto [corrupted, recipe] = bernoulli_process(clean, artifacts, seed);
      if (recipe.fired_count() > 0) {
        s.pairs.push_back({std::move(corrupted), clean});
        ++seed;
        break;
      }
    }
    s.corrupted_psnr += psnr(clean, s.pairs.back().input) / 4.0;
  }
  return s;
}

ProbeResult overfit_probe(double learning_rate, int max_steps, double margin_db, int eval_every) {
  auto setup = probe_pairs(7);
  OptimizerConfig opt;
  opt.learning_rate = learning_rate;
  opt.accumulation_steps = 4;
  TrainConfig tc;
  tc.batch_size = 1;
  tc.max_steps = max_steps;
  tc.seed = 1;
  const ModelConfig model;
  TrainSession session(init_params<float>(model, 1), opt, tc, setup.pairs, setup.pairs);
  ProbeResult r{setup.corrupted_psnr, -1e300, 0};
  while (r.steps < max_steps) {
    session.step();
    ++r.steps;
    if (r.steps % eval_every == 0 || r.steps == max_steps) {
      r.reconstructed_psnr = session.evaluate().psnr;
      if (r.reconstructed_psnr >= r.corrupted_psnr + margin_db) break;
    }
  }
  return r;
}

BernoulliStats bernoulli_stats(int trials, std::uint64_t base_seed) {
  const ArtifactConfig cfg;
  BernoulliStats s;
  s.histogram.assign(kArtifactCount + 1, 0);
  double total = 0;
  for (int t = 0; t < trials; ++t) {
    const int k = sample_recipe(cfg, 32, base_seed + static_cast<std::uint64_t>(t)).fired_count();
    ++s.histogram[static_cast<std::size_t>(k)];
    total += k;
  }
  s.mean = total / trials;

  // Binomial(8, 1/8) pmf; counts >= 5 are pooled so every expected count exceeds 5.
  const int n = kArtifactCount;
  const double p = 1.0 / n;
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    double c = 1;
    for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
    pmf[static_cast<std::size_t>(k)] = c * std::pow(p, k) * std::pow(1 - p, n - k);
  }
  constexpr int kPooled = 5;
  for (int bin = 0; bin <= kPooled; ++bin) {
    double expected = 0, observed = 0;
    for (int k = bin; k <= (bin == kPooled ? n : bin); ++k) {
      expected += pmf[static_cast<std::size_t>(k)] * trials;
      observed += s.histogram[static_cast<std::size_t>(k)];
    }
    s.chi2 += (observed - expected) * (observed - expected) / expected;
  }
  s.dof = kPooled;  // six bins, no fitted parameters
  return s;
}

double chi2_critical_01(int dof) {
  // Upper 1% points of the chi-squared distribution.
  static constexpr double table[] = {0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090};
  if (dof < 1 || dof > 8) throw std::invalid_argument("chi2_critical_01: dof out of table range");
  return table[dof];
}

}  // namespace g2l::check
