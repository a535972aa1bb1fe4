#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "g2l/windowing.hpp"

namespace g2l {

/// Shape of the volumetric windowed transformer.
struct ModelConfig {
  int side = 32;    // S, voxels per axis
  int patch = 4;    // P, voxels per patch axis
  int window = 2;   // W, cells per window axis
  int embed = 32;   // E
  int heads = 4;    // H
  int layers = 4;   // L, attention sub-blocks; odd layers W-MSA, even layers `mixing`
  int dims = 3;
  WindowScheme mixing = WindowScheme::g2l;  // sw_msa gives the shifted-window ablation

  int grid() const { return side / patch; }
  int patch_volume() const { return patch * patch * patch; }
  int head_dim() const { return embed / heads; }
  std::size_t cells() const { return static_cast<std::size_t>(grid()) * grid() * grid(); }

  /// Throws PreconditionError naming the first violated constraint:
  /// P | S, W | S/P, H | E, L even and positive.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorSpec {
  std::string name;
  std::size_t size;
};

std::size_t bias_table_size(int window_len, int dims);
std::vector<TensorSpec> layer_tensor_specs(int embed, int heads, int window_len, int dims,
                                           const std::string& prefix = "");
std::vector<TensorSpec> model_tensor_specs(const ModelConfig& cfg);

/// Weight is row-major [out][in]; y = W x + b.
template <class T>
struct AffineView {
  std::span<T> weight;
  std::span<T> bias;
  int in = 0;
  int out = 0;

  operator AffineView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {weight, bias, in, out};
  }
};

template <class T>
struct NormView {
  std::span<T> scale;
  std::span<T> shift;

  operator NormView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {scale, shift};
  }
};

/// Attention weights: pre-norm, fused QKV projection (rows [q | k | v], head h
/// owns columns [h*d, (h+1)*d) of each), per-head relative-bias table,
/// norm before the head projection, and the head projection itself.
template <class T>
struct AttentionView {
  NormView<T> norm;
  AffineView<T> qkv;
  std::span<T> rel_bias;
  NormView<T> proj_norm;
  AffineView<T> proj;
  int heads = 0;
  int window_len = 0;
  int dims = 0;

  operator AttentionView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {norm, qkv, rel_bias, proj_norm, proj, heads, window_len, dims};
  }
};

/// norm -> fc (E -> 4E) -> GeLU -> norm -> fc (4E -> E)
template <class T>
struct FeatureBlockView {
  NormView<T> norm1;
  AffineView<T> fc1;
  NormView<T> norm2;
  AffineView<T> fc2;

  operator FeatureBlockView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {norm1, fc1, norm2, fc2};
  }
};

template <class T>
struct LayerView {
  AttentionView<T> attn;
  FeatureBlockView<T> ff;

  operator LayerView<const T>() const
    requires(!std::is_const_v<T>)
  {
    return {attn, ff};
  }
};

template <class T>
struct ModelView {
  AffineView<T> embed;
  std::vector<LayerView<T>> layers;
  NormView<T> final_norm;
  AffineView<T> unembed;
};

/// Carves consecutive tensors out of a flat buffer, in declaration order.
template <class T>
class TensorCursor {
 public:
  explicit TensorCursor(std::span<T> buffer) : buffer_(buffer) {}

  std::span<T> take(std::size_t n) {
    auto s = buffer_.subspan(offset_, n);
    offset_ += n;
    return s;
  }
  NormView<T> norm(int width) { return {take(width), take(width)}; }
  AffineView<T> affine(int in, int out) {
    auto w = take(static_cast<std::size_t>(in) * out);
    return {w, take(out), in, out};
  }
  std::size_t consumed() const { return offset_; }

 private:
  std::span<T> buffer_;
  std::size_t offset_ = 0;
};

template <class T>
LayerView<T> take_layer(TensorCursor<T>& cur, int embed, int heads, int window_len, int dims) {
  LayerView<T> v;
  v.attn.norm = cur.norm(embed);
  v.attn.qkv = cur.affine(embed, 3 * embed);
  v.attn.rel_bias = cur.take(static_cast<std::size_t>(heads) * bias_table_size(window_len, dims));
  v.attn.proj_norm = cur.norm(embed);
  v.attn.proj = cur.affine(embed, embed);
  v.attn.heads = heads;
  v.attn.window_len = window_len;
  v.attn.dims = dims;
  v.ff.norm1 = cur.norm(embed);
  v.ff.fc1 = cur.affine(embed, 4 * embed);
  v.ff.norm2 = cur.norm(4 * embed);
  v.ff.fc2 = cur.affine(4 * embed, embed);
  return v;
}

template <class T>
ModelView<T> make_model_view(std::span<T> values, const ModelConfig& cfg) {
  TensorCursor<T> cur(values);
  ModelView<T> v;
  v.embed = cur.affine(cfg.patch_volume(), cfg.embed);
  for (int l = 0; l < cfg.layers; ++l)
    v.layers.push_back(take_layer(cur, cfg.embed, cfg.heads, cfg.window, cfg.dims));
  v.final_norm = cur.norm(cfg.embed);
  v.unembed = cur.affine(cfg.embed, cfg.patch_volume());
  return v;
}

std::size_t model_param_count(const ModelConfig& cfg);

/// All model parameters in one flat buffer; gradients and optimizer
/// moments share the same layout.
template <class T>
struct ModelParams {
  ModelConfig config;
  std::vector<T> values;

  ModelParams() = default;
  explicit ModelParams(const ModelConfig& cfg) : config(cfg), values(model_param_count(cfg), T(0)) {}

  ModelView<T> view() { return make_model_view<T>(values, config); }
  ModelView<const T> view() const { return make_model_view<const T>(values, config); }

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out(config);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
    return out;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Weights of a single residual sub-block, for use outside a full model.
template <class T>
struct LayerParams {
  int embed = 0;
  int heads = 0;
  int window_len = 0;
  int dims = 0;
  std::vector<T> values;

  LayerParams() = default;
  LayerParams(int embed_, int heads_, int window_len_, int dims_);

  LayerView<T> view() {
    TensorCursor<T> cur(values);
    return take_layer(cur, embed, heads, window_len, dims);
  }
  LayerView<const T> view() const {
    TensorCursor<const T> cur(values);
    return take_layer(cur, embed, heads, window_len, dims);
  }
};

/// Variance-1/fan_in uniform weights, zero affine biases, zero relative-bias
/// tables, unit-scale zero-shift norms. Pure function of (config, seed).
template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

template <class T>
LayerParams<T> init_layer(int embed, int heads, int window_len, int dims, std::uint64_t seed);

}  // namespace g2l
