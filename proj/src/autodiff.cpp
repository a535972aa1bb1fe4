#include "g2l/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "g2l/error.hpp"
#include "g2l/layers.hpp"

namespace g2l {

template <class T>
void layer_norm_backward(std::span<const T> dy, std::size_t rows, std::size_t width, NormView<const T> n,
                         const NormCache<T>& cache, std::span<T> dx, NormView<T> grad) {
  std::vector<T> dxhat(width);
  const T inv_w = T(1) / static_cast<T>(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyr = dy.data() + r * width;
    const T* xh = cache.xhat.data() + r * width;
    T mean1 = 0, mean2 = 0;
    for (std::size_t i = 0; i < width; ++i) {
      grad.scale[i] += dyr[i] * xh[i];
      grad.shift[i] += dyr[i];
      dxhat[i] = dyr[i] * n.scale[i];
      mean1 += dxhat[i];
      mean2 += dxhat[i] * xh[i];
    }
    mean1 *= inv_w;
    mean2 *= inv_w;
    T* dxr = dx.data() + r * width;
    const T rstd = cache.rstd[r];
    for (std::size_t i = 0; i < width; ++i) dxr[i] = rstd * (dxhat[i] - mean1 - xh[i] * mean2);
  }
}

template <class T>
void attention_backward(std::span<const T> dy, std::size_t rows, const AttentionPlan& plan,
                        AttentionView<const T> w, const AttentionCache<T>& c, std::span<T> dx,
                        AttentionView<T> grad) {
  const std::size_t e = static_cast<std::size_t>(w.qkv.in);
  const int heads = w.heads;
  const std::size_t dh = e / heads;
  const std::size_t n = plan.partition.window_volume;
  const std::size_t table = bias_table_size(w.window_len, w.dims);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  std::vector<T> d_proj_in(rows * e), d_heads(rows * e), d_qkv(rows * 3 * e, T(0)), d_normed(rows * e);
  affine_backward<T>(c.proj_in, rows, w.proj, dy, d_proj_in, grad.proj);
  layer_norm_backward<T>(d_proj_in, rows, e, w.proj_norm, c.proj_norm, d_heads, grad.proj_norm);

  std::vector<T> dp(n), ds(n);
  for (int win = 0; win < plan.partition.window_count; ++win) {
    const auto cells = plan.partition.window(win);
    for (int h = 0; h < heads; ++h) {
      const T* probs = c.probs.data() + (static_cast<std::size_t>(win) * heads + h) * n * n;
      const std::size_t qo = h * dh, ko = e + h * dh, vo = 2 * e + h * dh;
      T* gbias = grad.rel_bias.data() + h * table;
      for (std::size_t i = 0; i < n; ++i) {
        const T* dout = d_heads.data() + cells[i] * e + h * dh;
        const T* row = probs + i * n;
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const T* v = c.qkv.data() + cells[j] * 3 * e + vo;
          T* dv = d_qkv.data() + cells[j] * 3 * e + vo;
          T s = 0;
          for (std::size_t d = 0; d < dh; ++d) {
            s += dout[d] * v[d];
            dv[d] += row[j] * dout[d];
          }
          dp[j] = s;
          dot += row[j] * s;
        }
        const T* q = c.qkv.data() + cells[i] * 3 * e + qo;
        T* dq = d_qkv.data() + cells[i] * 3 * e + qo;
        for (std::size_t j = 0; j < n; ++j) {
          const T g = row[j] * (dp[j] - dot);
          gbias[plan.rel_index[i * n + j]] += g;
          const T gs = g * scale;
          const T* k = c.qkv.data() + cells[j] * 3 * e + ko;
          T* dk = d_qkv.data() + cells[j] * 3 * e + ko;
          for (std::size_t d = 0; d < dh; ++d) {
            dq[d] += gs * k[d];
            dk[d] += gs * q[d];
          }
        }
      }
    }
  }

  affine_backward<T>(c.normed, rows, w.qkv, d_qkv, d_normed, grad.qkv);
  layer_norm_backward<T>(d_normed, rows, e, w.norm, c.norm, dx, grad.norm);
}

template <class T>
void feature_block_backward(std::span<const T> dy, std::size_t rows, FeatureBlockView<const T> w,
                            const FeatureCache<T>& c, std::span<T> dx, FeatureBlockView<T> grad) {
  const std::size_t e = static_cast<std::size_t>(w.fc1.in);
  const std::size_t hidden = static_cast<std::size_t>(w.fc1.out);
  std::vector<T> d_c2(rows * hidden), d_g(rows * hidden), d_c1(rows * e);
  affine_backward<T>(c.c2, rows, w.fc2, dy, d_c2, grad.fc2);
  layer_norm_backward<T>(d_c2, rows, hidden, w.norm2, c.norm2, d_g, grad.norm2);
  for (std::size_t i = 0; i < d_g.size(); ++i) d_g[i] *= gelu_derivative(c.h1[i]);
  affine_backward<T>(c.c1, rows, w.fc1, d_g, d_c1, grad.fc1);
  layer_norm_backward<T>(d_c1, rows, e, w.norm1, c.norm1, dx, grad.norm1);
}

template <class T>
T loss_value(std::span<const T> pred, std::span<const T> target, LossKind kind) {
  if (pred.size() != target.size() || pred.empty()) throw PreconditionError("loss: volume sides differ");
  T sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    sum += kind == LossKind::squared ? d * d : std::abs(d);
  }
  return sum / static_cast<T>(pred.size());
}

double loss(const Volume& pred, const Volume& target, LossKind kind) {
  if (pred.side != target.side) throw PreconditionError("loss: volume sides differ");
  double sum = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - target.data[i];
    sum += kind == LossKind::squared ? d * d : std::abs(d);
  }
  return sum / static_cast<double>(pred.data.size());
}

namespace {

template <class T>
struct LayerTape {
  std::vector<T> input;
  AttentionCache<T> attn;
  std::vector<T> attn_out;
  FeatureCache<T> ff;
};

}  // namespace

template <class T>
T accumulate_gradient(std::span<const T> input, std::span<const T> target, const ModelParams<T>& params,
                      LossKind kind, ModelParams<T>& grad, T weight) {
  const auto& cfg = params.config;
  if (!(grad.config == cfg) || grad.values.size() != params.values.size())
    throw PreconditionError("gradient buffer does not match parameter layout");
  const ModelPlan plan = make_model_plan(cfg);
  if (input.size() != plan.patch_map.size() || target.size() != input.size())
    throw PreconditionError("volume side does not match model side S=" + std::to_string(cfg.side));
  const std::size_t rows = cfg.cells(), e = cfg.embed, pv = cfg.patch_volume();
  const auto view = params.view();
  auto gview = grad.view();

  // Forward with tape. G2L layers gather through their id map; this is the
  // same arithmetic as the compactified path.
  std::vector<T> patches(rows * pv);
  gather_patches<T>(input, plan.patch_map, patches);
  std::vector<T> z(rows * e);
  affine_forward<T>(patches, rows, view.embed, z);

  std::vector<LayerTape<T>> tape(static_cast<std::size_t>(cfg.layers));
  std::vector<T> f(rows * e);
  for (int l = 1; l <= cfg.layers; ++l) {
    auto& t = tape[l - 1];
    const auto& layer = view.layers[l - 1];
    const AttentionPlan& ap = layer_scheme(cfg, l) == WindowScheme::w_msa ? plan.local : plan.mixing;
    t.input = z;
    t.attn_out.resize(rows * e);
    attention_forward<T>(z, rows, ap, layer.attn, t.attn_out, &t.attn);
    feature_block_forward<T>(t.attn_out, rows, layer.ff, f, &t.ff);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += f[i];
  }
  NormCache<T> final_cache;
  std::vector<T> normed(rows * e);
  layer_norm_forward<T>(z, rows, e, view.final_norm, normed, &final_cache);
  std::vector<T> out_patches(rows * pv);
  affine_forward<T>(normed, rows, view.unembed, out_patches);
  std::vector<T> pred(input.size());
  scatter_patches<T>(out_patches, plan.patch_map, pred);
  const T loss = loss_value<T>(pred, target, kind);

  // Reverse sweep.
  const T inv_n = weight / static_cast<T>(pred.size());
  std::vector<T> d_pred(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    d_pred[i] = kind == LossKind::squared ? T(2) * d * inv_n : (d > 0 ? inv_n : (d < 0 ? -inv_n : T(0)));
  }
  std::vector<T> d_patches(rows * pv);
  gather_patches<T>(d_pred, plan.patch_map, d_patches);
  std::vector<T> d_normed(rows * e), dz(rows * e);
  affine_backward<T>(normed, rows, view.unembed, d_patches, d_normed, gview.unembed);
  layer_norm_backward<T>(d_normed, rows, e, view.final_norm, final_cache, dz, gview.final_norm);

  std::vector<T> d_attn_out(rows * e), d_in(rows * e);
  for (int l = cfg.layers; l >= 1; --l) {
    auto& t = tape[l - 1];
    const auto& layer = view.layers[l - 1];
    const AttentionPlan& ap = layer_scheme(cfg, l) == WindowScheme::w_msa ? plan.local : plan.mixing;
    feature_block_backward<T>(dz, rows, layer.ff, t.ff, d_attn_out, gview.layers[l - 1].ff);
    attention_backward<T>(d_attn_out, rows, ap, layer.attn, t.attn, d_in, gview.layers[l - 1].attn);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += d_in[i];
  }
  affine_backward<T>(patches, rows, view.embed, dz, std::span<T>(), gview.embed);
  return loss;
}

template <class T>
ModelParams<T> backward(std::span<const T> input, std::span<const T> target, const ModelParams<T>& params,
                        LossKind kind) {
  ModelParams<T> grad(params.config);
  accumulate_gradient<T>(input, target, params, kind, grad, T(1));
  return grad;
}

ModelParams<float> backward(const Volume& x, const Volume& target, const ModelParams<float>& params,
                            LossKind kind) {
  if (x.side != target.side) throw PreconditionError("backward: input and target sides differ");
  return backward<float>(std::span<const float>(x.data), std::span<const float>(target.data), params, kind);
}

#define G2L_INSTANTIATE(T)                                                                                   \
  template void layer_norm_backward<T>(std::span<const T>, std::size_t, std::size_t, NormView<const T>,   \
                                       const NormCache<T>&, std::span<T>, NormView<T>);                   \
  template void attention_backward<T>(std::span<const T>, std::size_t, const AttentionPlan&,              \
                                      AttentionView<const T>, const AttentionCache<T>&, std::span<T>,     \
                                      AttentionView<T>);                                                  \
  template void feature_block_backward<T>(std::span<const T>, std::size_t, FeatureBlockView<const T>,     \
                                          const FeatureCache<T>&, std::span<T>, FeatureBlockView<T>);     \
  template T loss_value<T>(std::span<const T>, std::span<const T>, LossKind);                             \
  template T accumulate_gradient<T>(std::span<const T>, std::span<const T>, const ModelParams<T>&,        \
                                    LossKind, ModelParams<T>&, T);                                        \
  template ModelParams<T> backward<T>(std::span<const T>, std::span<const T>, const ModelParams<T>&, LossKind);

G2L_INSTANTIATE(float)
G2L_INSTANTIATE(double)

#undef G2L_INSTANTIATE

}  // namespace g2l
