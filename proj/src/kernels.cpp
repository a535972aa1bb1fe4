#include <algorithm>
#include <cmath>

#include "g2l/error.hpp"
#include "g2l/layers.hpp"
#include "g2l/parallel.hpp"

namespace g2l {

template <class T>
void softmax_inplace(std::span<T> row) {
  T hi = row[0];
  for (T v : row) hi = std::max(hi, v);
  T sum = 0;
  for (T& v : row) {
    v = std::exp(v - hi);
    sum += v;
  }
  const T inv = T(1) / sum;
  for (T& v : row) v *= inv;
}

template <class T>
void affine_forward(std::span<const T> x, std::size_t rows, AffineView<const T> a, std::span<T> y) {
  const std::size_t in = a.in, out = a.out;
  if (x.size() != rows * in || y.size() != rows * out)
    throw PreconditionError("affine: input/output shape mismatch");
  // Transposed weight keeps the inner loop a contiguous axpy over outputs.
  std::vector<T> wt(in * out);
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = a.weight[o * in + i];
  for (std::size_t r = 0; r < rows; ++r) {
    T* yr = y.data() + r * out;
    const T* xr = x.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) yr[o] = a.bias[o];
    for (std::size_t i = 0; i < in; ++i) {
      const T xi = xr[i];
      const T* wi = wt.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
    }
  }
}

template <class T>
void affine_backward(std::span<const T> x, std::size_t rows, AffineView<const T> a, std::span<const T> dy,
                     std::span<T> dx, AffineView<T> grad) {
  const std::size_t in = a.in, out = a.out;
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), T(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyr = dy.data() + r * out;
    const T* xr = x.data() + r * in;
    T* dxr = dx.empty() ? nullptr : dx.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const T g = dyr[o];
      grad.bias[o] += g;
      if (g == T(0)) continue;
      T* gw = grad.weight.data() + o * in;
      const T* w = a.weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * xr[i];
      if (dxr)
        for (std::size_t i = 0; i < in; ++i) dxr[i] += g * w[i];
    }
  }
}

template <class T>
void layer_norm_forward(std::span<const T> x, std::size_t rows, std::size_t width, NormView<const T> n,
                        std::span<T> y, NormCache<T>* cache) {
  if (cache) {
    cache->xhat.resize(rows * width);
    cache->rstd.resize(rows);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * width;
    T* yr = y.data() + r * width;
    T mean = 0;
    for (std::size_t i = 0; i < width; ++i) mean += xr[i];
    mean /= static_cast<T>(width);
    T var = 0;
    for (std::size_t i = 0; i < width; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<T>(width);
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    for (std::size_t i = 0; i < width; ++i) {
      const T xh = (xr[i] - mean) * rstd;
      if (cache) cache->xhat[r * width + i] = xh;
      yr[i] = xh * n.scale[i] + n.shift[i];
    }
    if (cache) cache->rstd[r] = rstd;
  }
}

AttentionPlan make_attention_plan(const WindowIdMap& ids) {
  AttentionPlan plan;
  plan.partition = make_partition(ids);
  plan.rel_index = relative_offset_index(ids.window_len, ids.dims);
  return plan;
}

template <class T>
void attention_forward(std::span<const T> x, std::size_t rows, const AttentionPlan& plan,
                       AttentionView<const T> w, std::span<T> y, AttentionCache<T>* cache, int threads) {
  const std::size_t e = static_cast<std::size_t>(w.qkv.in);
  const int heads = w.heads;
  if (heads <= 0 || e % heads != 0) throw PreconditionError("attention: head count must divide embed dim");
  if (rows != plan.partition.cells.size()) throw PreconditionError("attention: window ids do not match grid");
  if (plan.partition.window_len != w.window_len || plan.partition.dims != w.dims)
    throw PreconditionError("attention: relative-bias table does not match window shape");
  const std::size_t dh = e / heads;
  const std::size_t n = plan.partition.window_volume;
  const std::size_t table = bias_table_size(w.window_len, w.dims);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  AttentionCache<T> local;
  AttentionCache<T>& c = cache ? *cache : local;
  c.normed.resize(rows * e);
  c.qkv.resize(rows * 3 * e);
  c.heads_out.assign(rows * e, T(0));
  c.proj_in.resize(rows * e);
  if (cache) c.probs.resize(plan.partition.window_count * heads * n * n);

  layer_norm_forward<T>(x, rows, e, w.norm, c.normed, cache ? &c.norm : nullptr);
  affine_forward<T>(c.normed, rows, w.qkv, c.qkv);

  auto one_window = [&](std::size_t win) {
    std::vector<T> probs(n * n);
    const auto cells = plan.partition.window(static_cast<int>(win));
    for (int h = 0; h < heads; ++h) {
      const std::size_t qo = h * dh, ko = e + h * dh, vo = 2 * e + h * dh;
      const T* bias = w.rel_bias.data() + h * table;
      for (std::size_t i = 0; i < n; ++i) {
        const T* q = c.qkv.data() + cells[i] * 3 * e + qo;
        T* row = probs.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          const T* k = c.qkv.data() + cells[j] * 3 * e + ko;
          T s = 0;
          for (std::size_t d = 0; d < dh; ++d) s += q[d] * k[d];
          row[j] = s * scale + bias[plan.rel_index[i * n + j]];
        }
        softmax_inplace<T>(std::span<T>(row, n));
        T* out = c.heads_out.data() + cells[i] * e + h * dh;
        for (std::size_t j = 0; j < n; ++j) {
          const T p = row[j];
          const T* v = c.qkv.data() + cells[j] * 3 * e + vo;
          for (std::size_t d = 0; d < dh; ++d) out[d] += p * v[d];
        }
      }
      if (cache)
        std::copy(probs.begin(), probs.end(), c.probs.begin() + (win * heads + h) * n * n);
    }
  };
  const auto windows = static_cast<std::size_t>(plan.partition.window_count);
  if (threads > 1) {
    parallel_for(windows, one_window, threads);
  } else {
    for (std::size_t win = 0; win < windows; ++win) one_window(win);
  }

  layer_norm_forward<T>(c.heads_out, rows, e, w.proj_norm, c.proj_in, cache ? &c.proj_norm : nullptr);
  affine_forward<T>(c.proj_in, rows, w.proj, y);
}

template <class T>
void feature_block_forward(std::span<const T> x, std::size_t rows, FeatureBlockView<const T> w,
                           std::span<T> y, FeatureCache<T>* cache) {
  const std::size_t e = static_cast<std::size_t>(w.fc1.in);
  const std::size_t hidden = static_cast<std::size_t>(w.fc1.out);
  if (x.size() != rows * e || y.size() != rows * e) throw PreconditionError("feature block: shape mismatch");
  FeatureCache<T> local;
  FeatureCache<T>& c = cache ? *cache : local;
  c.c1.resize(rows * e);
  c.h1.resize(rows * hidden);
  c.g.resize(rows * hidden);
  c.c2.resize(rows * hidden);
  layer_norm_forward<T>(x, rows, e, w.norm1, c.c1, cache ? &c.norm1 : nullptr);
  affine_forward<T>(c.c1, rows, w.fc1, c.h1);
  for (std::size_t i = 0; i < c.h1.size(); ++i) c.g[i] = gelu(c.h1[i]);
  layer_norm_forward<T>(c.g, rows, hidden, w.norm2, c.c2, cache ? &c.norm2 : nullptr);
  affine_forward<T>(c.c2, rows, w.fc2, y);
}

#define G2L_INSTANTIATE(T)                                                                                    \
  template void softmax_inplace<T>(std::span<T>);                                                          \
  template void affine_forward<T>(std::span<const T>, std::size_t, AffineView<const T>, std::span<T>);     \
  template void affine_backward<T>(std::span<const T>, std::size_t, AffineView<const T>, std::span<const T>, \
                                   std::span<T>, AffineView<T>);                                           \
  template void layer_norm_forward<T>(std::span<const T>, std::size_t, std::size_t, NormView<const T>,     \
                                      std::span<T>, NormCache<T>*);                                        \
  template void attention_forward<T>(std::span<const T>, std::size_t, const AttentionPlan&,                \
                                     AttentionView<const T>, std::span<T>, AttentionCache<T>*, int);            \
  template void feature_block_forward<T>(std::span<const T>, std::size_t, FeatureBlockView<const T>,       \
                                         std::span<T>, FeatureCache<T>*);

G2L_INSTANTIATE(float)
G2L_INSTANTIATE(double)

#undef G2L_INSTANTIATE

}  // namespace g2l
