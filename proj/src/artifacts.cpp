#include "g2l/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "g2l/error.hpp"
#include "g2l/fft.hpp"

namespace g2l {

namespace {

void check_axis(int axis) {
  if (axis < 0 || axis > 2) throw PreconditionError("axis must be 0, 1 or 2, got " + std::to_string(axis));
}

int coord(std::size_t index, int side, int axis) {
  for (int a = 0; a < axis; ++a) index /= side;
  return static_cast<int>(index % side);
}

std::size_t stride_of(int side, int axis) {
  std::size_t s = 1;
  for (int a = 0; a < axis; ++a) s *= side;
  return s;
}

int mirror(int i, int n) {
  // Edge-inclusive reflection: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> to_double(const Volume& v) { return {v.data.begin(), v.data.end()}; }

Volume from_double(int side, const std::vector<double>& d) {
  Volume v(side);
  for (std::size_t i = 0; i < d.size(); ++i) v.data[i] = static_cast<float>(d[i]);
  return v;
}

}  // namespace

std::string_view artifact_tag(ArtifactType t) {
  switch (t) {
    case ArtifactType::anisotropy: return "anisotropy";
    case ArtifactType::gamma: return "gamma";
    case ArtifactType::bias_field: return "bias_field";
    case ArtifactType::motion: return "motion";
    case ArtifactType::spiking: return "spiking";
    case ArtifactType::blur: return "blur";
    case ArtifactType::noise: return "noise";
    case ArtifactType::ghosting: return "ghosting";
  }
  return "unknown";
}

ArtifactType parse_artifact_tag(std::string_view tag) {
  for (ArtifactType t : kArtifactOrder)
    if (artifact_tag(t) == tag) return t;
  throw FormatError(FormatErrorKind::malformed, "unknown artifact tag '" + std::string(tag) + "'");
}

Volume apply_anisotropy(const Volume& v, int axis, int factor) {
  check_axis(axis);
  if (factor < 1 || v.side % factor != 0)
    throw PreconditionError("anisotropy factor " + std::to_string(factor) + " must divide side " +
                            std::to_string(v.side));
  if (factor == 1) return v;
  const int s = v.side, n = s / factor;
  const std::size_t stride = stride_of(s, axis);
  Volume out(s);
  std::vector<double> line(s), pooled(n);
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    if (coord(i, s, axis) != 0) continue;
    for (int k = 0; k < s; ++k) line[k] = v.data[i + k * stride];
    for (int j = 0; j < n; ++j) {
      double sum = 0;
      for (int k = 0; k < factor; ++k) sum += line[j * factor + k];
      pooled[j] = sum / factor;
    }
    for (int x = 0; x < s; ++x) {
      // Pooled sample j is centred at original coordinate (j + 0.5) * factor - 0.5.
      const double t = std::clamp((x + 0.5) / factor - 0.5, 0.0, static_cast<double>(n - 1));
      const int j0 = static_cast<int>(std::floor(t));
      const int j1 = std::min(j0 + 1, n - 1);
      const double w = t - j0;
      out.data[i + x * stride] = static_cast<float>((1.0 - w) * pooled[j0] + w * pooled[j1]);
    }
  }
  return out;
}

Volume apply_gamma(const Volume& v, double gamma) {
  if (!(gamma > 0.0)) throw PreconditionError("gamma must be positive");
  Volume out = v;
  for (float& f : out.data) {
    if (!(f >= 0.0f && f <= 1.0f)) throw PreconditionError("gamma expects intensities in [0, 1]");
    f = static_cast<float>(std::pow(static_cast<double>(f), gamma));
  }
  return out;
}

Volume apply_bias_field(const Volume& v, std::span<const double> coefficients) {
  if (coefficients.size() != kBiasFieldTerms)
    throw PreconditionError("bias field needs " + std::to_string(kBiasFieldTerms) + " coefficients, got " +
                            std::to_string(coefficients.size()));
  const int s = v.side;
  const double norm = s > 1 ? 2.0 / (s - 1) : 0.0;
  Volume out(s);
  std::size_t idx = 0;
  for (int z = 0; z < s; ++z)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x, ++idx) {
        const double u = x * norm - 1.0, w = y * norm - 1.0, t = z * norm - 1.0;
        double q = 0;
        int term = 0;
        for (int total = 0; total <= 3; ++total)
          for (int pz = 0; pz <= total; ++pz)
            for (int py = 0; py <= total - pz; ++py, ++term) {
              const int px = total - pz - py;
              q += coefficients[term] * std::pow(u, px) * std::pow(w, py) * std::pow(t, pz);
            }
        out.data[idx] = static_cast<float>(v.data[idx] * std::exp(q));
      }
  return out;
}

Volume apply_motion(const Volume& v, int n_movements, std::span<const Shift3> shifts, int axis) {
  check_axis(axis);
  if (n_movements < 0 || static_cast<int>(shifts.size()) != n_movements)
    throw PreconditionError("motion needs exactly one shift per movement");
  const int s = v.side;
  for (const auto& sh : shifts)
    if (std::abs(sh.dx) * 8 > s || std::abs(sh.dy) * 8 > s || std::abs(sh.dz) * 8 > s)
      throw PreconditionError("motion shift exceeds S/8 on some axis");
  if (n_movements > s - 1) throw PreconditionError("more motion bands than k-space planes");

  KSpace k = dft3(v);
  const int bands = n_movements + 1;
  for (std::size_t i = 0; i < k.data.size(); ++i) {
    const int kk = coord(i, s, axis);
    const int centred = (kk + s / 2) % s;
    const int band = centred * bands / s;
    if (band == 0) continue;
    const Shift3& sh = shifts[band - 1];
    const int kx = coord(i, s, 0), ky = coord(i, s, 1), kz = coord(i, s, 2);
    const long phase_num = static_cast<long>(kx) * sh.dx + static_cast<long>(ky) * sh.dy + static_cast<long>(kz) * sh.dz;
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(((phase_num % s) + s) % s) / s;
    k.data[i] *= Complex(std::cos(angle), std::sin(angle));
  }
  return idft3(k);
}

Volume apply_ghosting(const Volume& v, int axis, int period, double intensity) {
  check_axis(axis);
  if (period < 2 || period > v.side / 2)
    throw PreconditionError("ghosting period must lie in [2, S/2], got " + std::to_string(period));
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw PreconditionError("ghosting intensity must lie in [0, 1]");
  KSpace k = dft3(v);
  const int s = v.side;
  for (std::size_t i = 0; i < k.data.size(); ++i) {
    const int kk = coord(i, s, axis);
    if (kk != 0 && kk % period == 0) k.data[i] *= (1.0 - intensity);
  }
  return idft3(k);
}

Volume apply_spiking(const Volume& v, std::span<const Spike> spikes, double magnitude) {
  if (!(magnitude >= 0.0)) throw PreconditionError("spike magnitude must be non-negative");
  const int s = v.side;
  KSpace k = dft3(v);
  double peak = 0;
  for (const auto& c : k.data) peak = std::max(peak, std::abs(c));
  const double amp = magnitude * peak;
  for (const auto& sp : spikes) {
    if (sp.kx < 0 || sp.ky < 0 || sp.kz < 0 || sp.kx >= s || sp.ky >= s || sp.kz >= s)
      throw PreconditionError("spike coordinate out of range");
    if (sp.kx == 0 && sp.ky == 0 && sp.kz == 0) throw PreconditionError("spike must not sit on the DC coefficient");
    const std::size_t a = k.index(sp.kx, sp.ky, sp.kz);
    const std::size_t b = k.index((s - sp.kx) % s, (s - sp.ky) % s, (s - sp.kz) % s);
    const Complex value = std::polar(amp, sp.phase);
    if (a == b) {
      k.data[a] += value.real();
    } else {
      k.data[a] += value;
      k.data[b] += std::conj(value);
    }
  }
  return idft3(k);
}

Volume apply_blur(const Volume& v, double sigma) {
  if (!(sigma >= 0.0)) throw PreconditionError("blur sigma must be non-negative");
  if (sigma == 0.0) return v;
  const int s = v.side;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& w : kernel) w /= total;

  std::vector<double> cur = to_double(v), next(cur.size());
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t stride = stride_of(s, axis);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const int c = coord(i, s, axis);
      const std::size_t base = i - c * stride;
      double acc = 0;
      for (int t = -radius; t <= radius; ++t) acc += kernel[t + radius] * cur[base + mirror(c + t, s) * stride];
      next[i] = acc;
    }
    std::swap(cur, next);
  }
  return from_double(s, cur);
}

Volume apply_noise(const Volume& v, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw PreconditionError("noise sigma must be non-negative");
  if (sigma == 0.0) return v;
  std::normal_distribution<double> dist(0.0, sigma);
  Volume out = v;
  for (float& f : out.data) f = static_cast<float>(f + dist(rng));
  return out;
}

Volume apply_noise(const Volume& v, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return apply_noise(v, sigma, rng);
}

Volume renormalize(const Volume& v) {
  const auto [lo_it, hi_it] = std::minmax_element(v.data.begin(), v.data.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-12) return v;
  Volume out = v;
  for (float& f : out.data) f = static_cast<float>((f - lo) / (hi - lo));
  return out;
}

void ArtifactConfig::validate() const {
  for (double p : probabilities)
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("artifact probabilities must lie in [0, 1]");
  if (ranges.anisotropy_factors.empty()) throw PreconditionError("anisotropy factor list is empty");
  if (ranges.spikes_max < 1 || ranges.movements_max < 1 || ranges.motion_shift_divisor < 8)
    throw PreconditionError("spike/movement counts must be >= 1 and the shift divisor >= 8");
}

int ArtifactRecipe::fired_count() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const auto& s) { return s.fired; }));
}

ArtifactRecipe sample_recipe(const ArtifactConfig& cfg, int side, std::uint64_t seed) {
  cfg.validate();
  if (side < 8) throw PreconditionError("artifact sampling needs side >= 8");
  const auto& r = cfg.ranges;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto integer = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  ArtifactRecipe recipe;
  recipe.seed = seed;
  for (int i = 0; i < kArtifactCount; ++i) {
    ArtifactStep step;
    step.type = kArtifactOrder[i];
    step.fired = unit(rng) < cfg.probabilities[i];
    if (step.fired) {
      switch (step.type) {
        case ArtifactType::anisotropy: {
          std::vector<int> usable;
          for (int f : r.anisotropy_factors)
            if (f >= 1 && side % f == 0) usable.push_back(f);
          if (usable.empty()) usable.push_back(1);
          const int axis = integer(0, 2);
          step.params = AnisotropyParams{axis, usable[integer(0, static_cast<int>(usable.size()) - 1)]};
          break;
        }
        case ArtifactType::gamma:
          step.params = GammaParams{std::exp(uniform(-r.log_gamma, r.log_gamma))};
          break;
        case ArtifactType::bias_field: {
          BiasFieldParams p;
          for (int t = 0; t < kBiasFieldTerms; ++t) p.coefficients.push_back(uniform(-r.bias_coefficient, r.bias_coefficient));
          step.params = std::move(p);
          break;
        }
        case ArtifactType::motion: {
          MotionParams p;
          p.axis = integer(0, 2);
          const int n = integer(1, r.movements_max);
          const int bound = side / r.motion_shift_divisor;
          for (int m = 0; m < n; ++m) p.shifts.push_back({integer(-bound, bound), integer(-bound, bound), integer(-bound, bound)});
          step.params = std::move(p);
          break;
        }
        case ArtifactType::spiking: {
          SpikingParams p;
          p.magnitude = uniform(r.spike_magnitude_min, r.spike_magnitude_max);
          const int n = integer(1, r.spikes_max);
          for (int m = 0; m < n; ++m) {
            Spike sp;
            do {
              sp.kx = integer(0, side - 1);
              sp.ky = integer(0, side - 1);
              sp.kz = integer(0, side - 1);
            } while (sp.kx == 0 && sp.ky == 0 && sp.kz == 0);
            sp.phase = uniform(0.0, 2.0 * std::numbers::pi);
            p.spikes.push_back(sp);
          }
          step.params = std::move(p);
          break;
        }
        case ArtifactType::blur:
          step.params = BlurParams{uniform(r.blur_sigma_min, r.blur_sigma_max)};
          break;
        case ArtifactType::noise: {
          const double sigma = uniform(r.noise_sigma_min, r.noise_sigma_max);
          step.params = NoiseParams{sigma, rng()};
          break;
        }
        case ArtifactType::ghosting: {
          const int axis = integer(0, 2);
          const int period = integer(2, std::max(2, side / 4));
          step.params = GhostingParams{axis, period, uniform(r.ghost_intensity_min, r.ghost_intensity_max)};
          break;
        }
      }
    }
    recipe.steps.push_back(std::move(step));
  }
  return recipe;
}

Volume apply_step(const Volume& v, const ArtifactStep& step) {
  if (!step.fired) return v;
  struct Visitor {
    const Volume& v;
    Volume operator()(std::monostate) const {
      throw FormatError(FormatErrorKind::malformed, "fired artifact step carries no parameters");
    }
    Volume operator()(const AnisotropyParams& p) const { return apply_anisotropy(v, p.axis, p.factor); }
    Volume operator()(const GammaParams& p) const {
      // Earlier steps may leave the running volume slightly outside [0, 1].
      Volume clamped = v;
      for (float& f : clamped.data) f = std::clamp(f, 0.0f, 1.0f);
      return apply_gamma(clamped, p.gamma);
    }
    Volume operator()(const BiasFieldParams& p) const { return apply_bias_field(v, p.coefficients); }
    Volume operator()(const MotionParams& p) const {
      return apply_motion(v, static_cast<int>(p.shifts.size()), p.shifts, p.axis);
    }
    Volume operator()(const SpikingParams& p) const { return apply_spiking(v, p.spikes, p.magnitude); }
    Volume operator()(const BlurParams& p) const { return apply_blur(v, p.sigma); }
    Volume operator()(const NoiseParams& p) const { return apply_noise(v, p.sigma, p.seed); }
    Volume operator()(const GhostingParams& p) const { return apply_ghosting(v, p.axis, p.period, p.intensity); }
  };
  return std::visit(Visitor{v}, step.params);
}

Volume replay(const ArtifactRecipe& recipe, const Volume& v) {
  Volume cur = v;
  for (const auto& step : recipe.steps) cur = apply_step(cur, step);
  return renormalize(cur);
}

std::pair<Volume, ArtifactRecipe> bernoulli_process(const Volume& v, const ArtifactConfig& cfg, std::uint64_t seed) {
  ArtifactRecipe recipe = sample_recipe(cfg, v.side, seed);
  Volume out = replay(recipe, v);
  return {std::move(out), std::move(recipe)};
}

}  // namespace g2l
