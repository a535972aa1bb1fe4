#include "g2l/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "g2l/error.hpp"

namespace g2l {

namespace {

void check_sides(int a, int b, const char* what) {
  if (a != b) throw PreconditionError(std::string(what) + ": sides differ (" + std::to_string(a) + " vs " +
                                      std::to_string(b) + ")");
}

int mirror(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Mean over the 7^3 window centred at every voxel, mirrored at the borders.
std::vector<double> box_mean(const std::vector<double>& in, int s) {
  const int r = kSsimWindow / 2;
  std::vector<double> cur = in, next(in.size());
  std::size_t strides[3] = {1, static_cast<std::size_t>(s), static_cast<std::size_t>(s) * s};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t stride = strides[axis];
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const int c = static_cast<int>((i / stride) % s);
      const std::size_t base = i - c * stride;
      double acc = 0;
      for (int t = -r; t <= r; ++t) acc += cur[base + mirror(c + t, s) * stride];
      next[i] = acc / kSsimWindow;
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace

double psnr(const Volume& ref, const Volume& test) {
  check_sides(ref.side, test.side, "psnr");
  double sum = 0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = static_cast<double>(ref.data[i]) - test.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(ref.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim3(const Volume& ref, const Volume& test) {
  check_sides(ref.side, test.side, "ssim3");
  if (ref.side < kSsimWindow) throw PreconditionError("ssim3 needs side >= 7, got " + std::to_string(ref.side));
  const int s = ref.side;
  const std::size_t n = ref.data.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = ref.data[i];
    y[i] = test.data[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = box_mean(x, s), my = box_mean(y, s);
  const auto mxx = box_mean(xx, s), myy = box_mean(yy, s), mxy = box_mean(xy, s);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double vx = std::max(0.0, mxx[i] - mx[i] * mx[i]);
    const double vy = std::max(0.0, myy[i] - my[i] * my[i]);
    const double cxy = mxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(n);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto b) { return b != 0; }));
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  check_sides(a.side, b.side, "dice");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
    na += pa;
    nb += pb;
    inter += pa && pb;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double dice_delta(const BinaryMask& hf, const BinaryMask& bap, const BinaryMask& rac) {
  check_sides(hf.side, bap.side, "dice_delta");
  check_sides(hf.side, rac.side, "dice_delta");
  return dice(hf, rac) - dice(hf, bap);
}

BinaryMask otsu_mask(const Volume& v) {
  constexpr int bins = 256;
  const auto [lo_it, hi_it] = std::minmax_element(v.data.begin(), v.data.end());
  const double lo = *lo_it, hi = *hi_it;
  BinaryMask mask(v.side);
  if (hi - lo < 1e-12) return mask;
  std::vector<double> hist(bins, 0.0);
  auto bin_of = [&](float f) { return std::min(bins - 1, static_cast<int>((f - lo) / (hi - lo) * bins)); };
  for (float f : v.data) hist[bin_of(f)] += 1.0;
  const double total = static_cast<double>(v.data.size());
  double sum_all = 0;
  for (int i = 0; i < bins; ++i) sum_all += i * hist[i];
  double w0 = 0, sum0 = 0, best = -1;
  int best_bin = 0;
  for (int t = 0; t < bins; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  for (std::size_t i = 0; i < v.data.size(); ++i) mask.data[i] = bin_of(v.data[i]) > best_bin ? 1 : 0;
  return mask;
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const Volume v = read_volume(path);
  BinaryMask m(v.side);
  for (std::size_t i = 0; i < v.data.size(); ++i) m.data[i] = v.data[i] != 0.0f ? 1 : 0;
  return m;
}

MetricReport evaluate(const Volume& ref, const Volume& test) {
  return {psnr(ref, test), ssim3(ref, test), std::nullopt};
}

std::string format_report(const MetricReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "psnr=%.6f ssim=%.6f", r.psnr, r.ssim);
  std::string out(buf);
  if (r.dice_delta) {
    std::snprintf(buf, sizeof buf, " dice_delta=%.6f", *r.dice_delta);
    out += buf;
  }
  return out;
}

}  // namespace g2l
