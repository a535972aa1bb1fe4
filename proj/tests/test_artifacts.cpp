#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "checks.hpp"
#include "g2l/artifacts.hpp"
#include "g2l/error.hpp"
#include "g2l/fft.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace g2l;
using g2l::test::max_rel_diff;
using g2l::test::random_volume;

namespace {

double mean(const Volume& v) {
  double s = 0;
  for (float f : v.data) s += f;
  return s / static_cast<double>(v.data.size());
}

double energy(const Volume& v) {
  double s = 0;
  for (float f : v.data) s += static_cast<double>(f) * f;
  return s;
}

Volume point_source(int S, int x, int y, int z) {
  Volume v(S);
  v.at(x, y, z) = 1.0f;
  return v;
}

}  // namespace

TEST_CASE("dft3") {
  SUBCASE("constant volume concentrates in DC") {
    const Volume c(8, 0.25f);
    const auto k = dft3(c);
    CHECK(k.data[0].real() == doctest::Approx(0.25 * 512).epsilon(1e-12));
    for (std::size_t i = 1; i < k.data.size(); ++i) CHECK(std::abs(k.data[i]) < 1e-10);
  }
  SUBCASE("inverse law") {
    const auto v = random_volume(16, 1);
    CHECK(max_rel_diff(idft3(dft3(v)).data, v.data) < 1e-5);
  }
  for (int S : {8, 6}) {
    CAPTURE(S);
    const auto v = random_volume(S, 2);
    const std::vector<double> d(v.data.begin(), v.data.end());
    const auto fast = dft3(v);
    const auto slow = oracle::direct_dft3(d, S);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < slow.size(); ++i) {
      num = std::max(num, std::abs(fast.data[i] - slow[i]));
      den = std::max(den, std::abs(slow[i]));
    }
    CHECK(num / den <= 1e-6);
    double spatial = 0, spectral = 0;
    for (double x : d) spatial += x * x;
    for (const auto& c : fast.data) spectral += std::norm(c);
    spectral /= static_cast<double>(d.size());
    CHECK(std::abs(spatial - spectral) <= 1e-4 * spatial);
  }
  CHECK(is_power_of_two(16));
  CHECK_FALSE(is_power_of_two(12));
}

TEST_CASE("anisotropy") {
  const Volume c(8, 0.3f);
  CHECK(max_rel_diff(apply_anisotropy(c, 1, 2).data, c.data) < 1e-6);
  const auto v = random_volume(8, 3);
  CHECK(apply_anisotropy(v, 2, 1) == v);
  for (int axis = 0; axis < 3; ++axis) {
    Volume stripes(8);
    for (int z = 0; z < 8; ++z)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) stripes.at(x, y, z) = static_cast<float>((axis == 0 ? x : axis == 1 ? y : z) % 2);
    const auto out = apply_anisotropy(stripes, axis, 2);
    for (float f : out.data) CHECK(f == doctest::Approx(0.5f));
  }
  CHECK_THROWS_AS(apply_anisotropy(v, 0, 3), PreconditionError);
}

TEST_CASE("gamma") {
  const auto v = random_volume(8, 4);
  CHECK(apply_gamma(v, 1.0) == v);
  const Volume h(8, 0.5f);
  CHECK(apply_gamma(h, 2.0).data[0] == doctest::Approx(0.25));
  const auto g = apply_gamma(v, 1.7);
  for (std::size_t i = 1; i < v.data.size(); ++i)
    CHECK((v.data[i] < v.data[i - 1]) == (g.data[i] < g.data[i - 1]));
  Volume bad = v;
  bad.data[3] = 1.5f;
  CHECK_THROWS_AS(apply_gamma(bad, 2.0), PreconditionError);
  CHECK_THROWS_AS(apply_gamma(v, 0.0), PreconditionError);
}

TEST_CASE("bias field") {
  const auto v = random_volume(8, 5);
  std::vector<double> coeff(kBiasFieldTerms, 0.0);
  CHECK(apply_bias_field(v, coeff) == v);
  coeff[0] = 0.4;
  const auto s = apply_bias_field(v, coeff);
  for (std::size_t i = 0; i < v.data.size(); ++i) CHECK(s.data[i] == doctest::Approx(v.data[i] * std::exp(0.4)).epsilon(1e-6));
  const Volume ones(8, 1.0f);
  const auto field = apply_bias_field(ones, test::random_values<double>(kBiasFieldTerms, 6, -2.0, 2.0));
  for (float f : field.data) CHECK(f > 0.0f);
  CHECK_THROWS_AS(apply_bias_field(v, std::vector<double>(19, 0.0)), PreconditionError);
}

TEST_CASE("motion") {
  const auto v = random_volume(16, 7);
  const std::vector<Shift3> zero(2);
  CHECK(max_rel_diff(apply_motion(v, 2, zero).data, v.data) < 1e-5);
  CHECK(max_rel_diff(apply_motion(v, 0, {}).data, v.data) < 1e-5);

  const auto p = point_source(16, 4, 5, 6);
  const std::vector<Shift3> one{{2, 0, 0}};
  const auto out = apply_motion(p, 1, one, 2);
  // A displaced partial copy appears at the shifted location.
  CHECK(std::abs(out.at(6, 5, 6)) > 0.1f);
  CHECK(out.at(4, 5, 6) < 0.95f);
  CHECK(energy(out) <= 2.0 * energy(p));
  CHECK(energy(out) >= 0.5 * energy(p));

  const std::vector<Shift3> too_far{{3, 0, 0}};
  CHECK_THROWS_AS(apply_motion(v, 1, too_far), PreconditionError);
  CHECK_THROWS_AS(apply_motion(v, 2, one), PreconditionError);
}

TEST_CASE("ghosting") {
  const auto v = random_volume(16, 8);
  CHECK(max_rel_diff(apply_ghosting(v, 1, 4, 0.0).data, v.data) < 1e-5);
  const auto g = apply_ghosting(v, 2, 3, 0.8);
  CHECK(std::abs(mean(g) - mean(v)) <= 1e-5 * mean(v));

  // Removing every even non-DC plane along x leaves a comb: on the line
  // through the source, 1/S + 1/2 at the source, 1/S - 1/2 half a field away,
  // 1/S elsewhere; zero off the line.
  const int S = 16;
  const auto ghost = apply_ghosting(point_source(S, 3, 5, 7), 0, 2, 1.0);
  for (int z = 0; z < S; ++z)
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        double expected = 0;
        if (y == 5 && z == 7) expected = 1.0 / S + (x == 3 ? 0.5 : x == 3 + S / 2 ? -0.5 : 0.0);
        REQUIRE(ghost.at(x, y, z) == doctest::Approx(expected).epsilon(1e-6).scale(1.0));
      }

  CHECK_THROWS_AS(apply_ghosting(v, 0, 1, 0.5), PreconditionError);
  CHECK_THROWS_AS(apply_ghosting(v, 0, 9, 0.5), PreconditionError);
  CHECK_THROWS_AS(apply_ghosting(v, 0, 2, 1.5), PreconditionError);
}

TEST_CASE("spiking") {
  const auto v = random_volume(16, 9);
  const std::vector<Spike> spikes{{1, 2, 3, 0.4}, {5, 0, 0, 1.0}};
  CHECK(max_rel_diff(apply_spiking(v, spikes, 0.0).data, v.data) < 1e-5);

  // On a constant field c the peak coefficient is the DC term c*S^3, so one
  // spike adds exactly 2 * magnitude * c * cos(2 pi k.x / S + phase).
  const int S = 8;
  const double c = 0.5, magnitude = 0.1, phase = 0.7;
  const std::vector<Spike> one{{1, 2, 0, phase}};
  const auto out = apply_spiking(Volume(S, static_cast<float>(c)), one, magnitude);
  for (int z = 0; z < S; ++z)
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double expected =
            c + 2 * magnitude * c * std::cos(2 * std::numbers::pi * (1 * x + 2 * y) / S + phase);
        REQUIRE(out.at(x, y, z) == doctest::Approx(expected).epsilon(1e-6));
      }
  const std::vector<Spike> dc{{0, 0, 0, 0.0}};
  CHECK_THROWS_AS(apply_spiking(v, dc, 0.1), PreconditionError);
}

TEST_CASE("blur and noise") {
  const auto v = random_volume(16, 10);
  CHECK(apply_blur(v, 0.0) == v);
  CHECK(apply_noise(v, 0.0, std::uint64_t{1}) == v);
  const auto b = apply_blur(v, 1.2);
  CHECK(std::abs(mean(b) - mean(v)) <= 1e-4 * mean(v));
  CHECK(energy(b) < energy(v));
  CHECK_THROWS_AS(apply_blur(v, -1.0), PreconditionError);
  CHECK_THROWS_AS(apply_noise(v, -1.0, std::uint64_t{1}), PreconditionError);

  const auto n = apply_noise(Volume(32), 0.05, std::uint64_t{11});
  const double m = mean(n);
  double var = 0;
  for (float f : n.data) var += (f - m) * (f - m);
  var /= static_cast<double>(n.data.size() - 1);
  CHECK(std::abs(var - 0.0025) <= 0.1 * 0.0025);
}

TEST_CASE("Bernoulli process") {
  PhantomSpec spec;
  spec.seed = 3;
  const auto clean = generate_phantom(spec);

  ArtifactConfig off;
  off.probabilities.fill(0.0);
  const auto [same, empty] = bernoulli_process(clean, off, 5);
  CHECK(same == clean);
  CHECK(empty.fired_count() == 0);
  CHECK(empty.steps.size() == kArtifactCount);

  ArtifactConfig on;
  on.probabilities.fill(1.0);
  const auto [all, recipe] = bernoulli_process(clean, on, 6);
  CHECK(recipe.fired_count() == kArtifactCount);
  for (int i = 0; i < kArtifactCount; ++i) CHECK(recipe.steps[static_cast<std::size_t>(i)].type == kArtifactOrder[static_cast<std::size_t>(i)]);
  CHECK(replay(recipe, clean) == all);
  CHECK(all.all_finite());
  const auto [lo, hi] = std::minmax_element(all.data.begin(), all.data.end());
  CHECK(*lo == 0.0f);
  CHECK(*hi == 1.0f);

  const ArtifactConfig def;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto [out, r] = bernoulli_process(clean, def, seed);
    REQUIRE(replay(r, clean) == out);
    REQUIRE(parse_recipe(format_recipe(r)) == r);
  }
  CHECK(bernoulli_process(clean, def, 9).second == bernoulli_process(clean, def, 9).second);

  const auto stats = check::bernoulli_stats(10000, 0);
  CHECK(stats.mean >= 0.95);
  CHECK(stats.mean <= 1.05);
  CHECK(stats.chi2 < check::chi2_critical_01(stats.dof));

  ArtifactConfig bad;
  bad.probabilities[2] = 1.5;
  CHECK_THROWS_AS(bernoulli_process(clean, bad, 1), PreconditionError);
}

TEST_CASE("recipe files") {
  test::TempDir dir("recipe");
  ArtifactConfig on;
  on.probabilities.fill(1.0);
  const auto r = sample_recipe(on, 32, 77);
  write_recipe(r, dir / "r.txt");
  const auto back = read_recipe(dir / "r.txt");
  CHECK(back == r);
  CHECK(format_recipe(back) == format_recipe(r));

  auto malformed = [](std::string_view text) {
    try {
      (void)parse_recipe(text);
    } catch (const FormatError& e) {
      return e.kind() == FormatErrorKind::malformed;
    }
    return false;
  };
  CHECK(malformed(""));
  CHECK(malformed("seed x\n"));
  CHECK(malformed("seed 1\nwobble 1\n"));
  CHECK(malformed("seed 1\ngamma 1\n"));
  CHECK(malformed("seed 1\ngamma 1 gamma=abc\n"));
  CHECK_THROWS_AS(read_recipe(dir / "missing.txt"), IoError);
}
