#include "g2l/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "g2l/error.hpp"
#include "g2l/layers.hpp"

namespace g2l {

void ModelConfig::validate() const {
  std::ostringstream msg;
  if (side <= 0 || patch <= 0 || window <= 0 || embed <= 0 || heads <= 0 || layers <= 0) {
    msg << "model config values must be positive";
  } else if (side % patch != 0) {
    msg << "patch length P=" << patch << " must divide volume side S=" << side;
  } else if (grid() % window != 0) {
    msg << "window length W=" << window << " must divide grid side S/P=" << grid();
  } else if (embed % heads != 0) {
    msg << "head count H=" << heads << " must divide embed dim E=" << embed;
  } else if (layers % 2 != 0) {
    msg << "layer count L=" << layers << " must be even";
  } else if (dims != 3) {
    msg << "volumetric model requires D=3, got " << dims;
  } else if (mixing == WindowScheme::sw_msa && window < 2) {
    msg << "shifted-window mixing needs W >= 2";
  }
  const auto s = msg.str();
  if (!s.empty()) throw PreconditionError(s);
}

std::size_t bias_table_size(int window_len, int dims) {
  std::size_t n = 1;
  for (int d = 0; d < dims; ++d) n *= static_cast<std::size_t>(2 * window_len - 1);
  return n;
}

std::vector<TensorSpec> layer_tensor_specs(int embed, int heads, int window_len, int dims,
                                           const std::string& prefix) {
  const std::size_t e = embed;
  return {
      {prefix + "attn.norm.scale", e},
      {prefix + "attn.norm.shift", e},
      {prefix + "attn.qkv.weight", 3 * e * e},
      {prefix + "attn.qkv.bias", 3 * e},
      {prefix + "attn.rel_bias", static_cast<std::size_t>(heads) * bias_table_size(window_len, dims)},
      {prefix + "attn.proj_norm.scale", e},
      {prefix + "attn.proj_norm.shift", e},
      {prefix + "attn.proj.weight", e * e},
      {prefix + "attn.proj.bias", e},
      {prefix + "ff.norm1.scale", e},
      {prefix + "ff.norm1.shift", e},
      {prefix + "ff.fc1.weight", 4 * e * e},
      {prefix + "ff.fc1.bias", 4 * e},
      {prefix + "ff.norm2.scale", 4 * e},
      {prefix + "ff.norm2.shift", 4 * e},
      {prefix + "ff.fc2.weight", 4 * e * e},
      {prefix + "ff.fc2.bias", e},
  };
}

std::vector<TensorSpec> model_tensor_specs(const ModelConfig& cfg) {
  const std::size_t e = cfg.embed, pv = cfg.patch_volume();
  std::vector<TensorSpec> specs{{"embed.weight", e * pv}, {"embed.bias", e}};
  for (int l = 0; l < cfg.layers; ++l) {
    auto layer = layer_tensor_specs(cfg.embed, cfg.heads, cfg.window, cfg.dims,
                                    "layers." + std::to_string(l) + ".");
    specs.insert(specs.end(), layer.begin(), layer.end());
  }
  specs.push_back({"final_norm.scale", e});
  specs.push_back({"final_norm.shift", e});
  specs.push_back({"unembed.weight", pv * e});
  specs.push_back({"unembed.bias", pv});
  return specs;
}

std::size_t model_param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : model_tensor_specs(cfg)) n += s.size;
  return n;
}

template <class T>
LayerParams<T>::LayerParams(int embed_, int heads_, int window_len_, int dims_)
    : embed(embed_), heads(heads_), window_len(window_len_), dims(dims_) {
  std::size_t n = 0;
  for (const auto& s : layer_tensor_specs(embed, heads, window_len, dims)) n += s.size;
  values.assign(n, T(0));
}

namespace {

template <class T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  void affine(AffineView<T> a) {
    const double bound = std::sqrt(3.0 / a.in);  // variance 1/fan_in
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& w : a.weight) w = static_cast<T>(dist(rng_));
    for (T& b : a.bias) b = T(0);
  }
  static void norm(NormView<T> n) {
    for (T& s : n.scale) s = T(1);
    for (T& s : n.shift) s = T(0);
  }
  void layer(LayerView<T> v) {
    norm(v.attn.norm);
    affine(v.attn.qkv);
    for (T& b : v.attn.rel_bias) b = T(0);
    norm(v.attn.proj_norm);
    affine(v.attn.proj);
    norm(v.ff.norm1);
    affine(v.ff.fc1);
    norm(v.ff.norm2);
    affine(v.ff.fc2);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

template <class T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<T> p(cfg);
  auto v = p.view();
  Initializer<T> init(seed);
  init.affine(v.embed);
  for (auto& layer : v.layers) init.layer(layer);
  Initializer<T>::norm(v.final_norm);
  init.affine(v.unembed);
  return p;
}

template <class T>
LayerParams<T> init_layer(int embed, int heads, int window_len, int dims, std::uint64_t seed) {
  if (heads <= 0 || embed % heads != 0) throw PreconditionError("head count must divide embed dim");
  LayerParams<T> p(embed, heads, window_len, dims);
  Initializer<T> init(seed);
  init.layer(p.view());
  return p;
}

WindowScheme layer_scheme(const ModelConfig& cfg, int layer) {
  return layer % 2 == 1 ? WindowScheme::w_msa : cfg.mixing;
}

ModelPlan make_model_plan(const ModelConfig& cfg) {
  cfg.validate();
  ModelPlan plan;
  plan.patch_map = patch_index_map(cfg.side, cfg.patch);
  plan.local = make_attention_plan(w_msa_ids(cfg.grid(), cfg.window, cfg.dims));
  plan.mixing = make_attention_plan(window_ids(cfg.mixing, cfg.grid(), cfg.window, cfg.dims));
  plan.compaction = invert_g2l(cfg.grid(), cfg.window, cfg.dims);
  return plan;
}

template <class T>
FeatureGrid<T> embed(std::span<const T> patches, const ModelParams<T>& params) {
  const auto& cfg = params.config;
  if (patches.size() != cfg.cells() * cfg.patch_volume())
    throw PreconditionError("embed: patch grid does not match the model's S and P");
  FeatureGrid<T> out(cfg.dims, cfg.grid(), cfg.embed);
  affine_forward<T>(patches, cfg.cells(), params.view().embed, out.data);
  return out;
}

FeatureGrid<float> embed(const PatchGrid& g, const ModelParams<float>& params) {
  if (g.patch_len != params.config.patch || g.grid_side != params.config.grid())
    throw PreconditionError("embed: patch grid does not match the model's S and P");
  return embed<float>(std::span<const float>(g.data), params);
}

template <class T>
FeatureGrid<T> window_attention(const FeatureGrid<T>& x, const WindowIdMap& ids, AttentionView<const T> w, int threads) {
  if (ids.dims != x.dims || ids.grid_side != x.grid_side)
    throw PreconditionError("window ids do not match the feature grid");
  if (w.qkv.in != x.embed_dim) throw PreconditionError("attention weights do not match embed dim");
  FeatureGrid<T> out(x.dims, x.grid_side, x.embed_dim);
  attention_forward<T>(x.data, x.cells(), make_attention_plan(ids), w, out.data, nullptr, threads);
  return out;
}

template <class T>
FeatureGrid<T> g2l_attention_compactified(const FeatureGrid<T>& x, int window_len, AttentionView<const T> w,
                                          int threads) {
  const auto table = invert_g2l(x.grid_side, window_len, x.dims);
  const FeatureGrid<T> packed = compactify(x, table);
  const FeatureGrid<T> attended = window_attention(packed, w_msa_ids(x.grid_side, window_len, x.dims), w, threads);
  return decompactify(attended, table);
}

template <class T>
FeatureGrid<T> feature_block(const FeatureGrid<T>& x, FeatureBlockView<const T> w) {
  if (w.fc1.in != x.embed_dim) throw PreconditionError("feature block weights do not match embed dim");
  FeatureGrid<T> out(x.dims, x.grid_side, x.embed_dim);
  feature_block_forward<T>(x.data, x.cells(), w, out.data, nullptr);
  return out;
}

template <class T>
FeatureGrid<T> residual_layer(const FeatureGrid<T>& z, const WindowIdMap& ids, LayerView<const T> w) {
  const FeatureGrid<T> f = feature_block(window_attention(z, ids, w.attn), w.ff);
  FeatureGrid<T> out = z;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += f.data[i];
  return out;
}

namespace {

template <class T>
void chain_inplace(std::vector<T>& z, const ModelParams<T>& params, const ModelPlan& plan, G2LPath path) {
  const auto& cfg = params.config;
  const auto view = params.view();
  const std::size_t rows = cfg.cells(), e = cfg.embed;
  std::vector<T> a(rows * e), f(rows * e), packed(rows * e), packed_out(rows * e);
  for (int l = 1; l <= cfg.layers; ++l) {
    const auto& layer = view.layers[l - 1];
    const WindowScheme scheme = layer_scheme(cfg, l);
    if (scheme == WindowScheme::g2l && path == G2LPath::compactified) {
      compactify_into<T>(z, e, plan.compaction, packed);
      attention_forward<T>(packed, rows, plan.local, layer.attn, packed_out, nullptr);
      decompactify_into<T>(packed_out, e, plan.compaction, a);
    } else {
      const AttentionPlan& ap = scheme == WindowScheme::w_msa ? plan.local : plan.mixing;
      attention_forward<T>(z, rows, ap, layer.attn, a, nullptr);
    }
    feature_block_forward<T>(a, rows, layer.ff, f, nullptr);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += f[i];
  }
}

}  // namespace

template <class T>
FeatureGrid<T> residual_chain(const FeatureGrid<T>& z0, const ModelParams<T>& params, G2LPath path) {
  const auto& cfg = params.config;
  cfg.validate();
  if (z0.dims != cfg.dims || z0.grid_side != cfg.grid() || z0.embed_dim != cfg.embed)
    throw PreconditionError("residual chain: feature grid does not match model config");
  const ModelPlan plan = make_model_plan(cfg);
  FeatureGrid<T> z = z0;
  chain_inplace(z.data, params, plan, path);
  return z;
}

template <class T>
std::vector<T> forward_values(std::span<const T> voxels, const ModelParams<T>& params, G2LPath path) {
  const auto& cfg = params.config;
  const ModelPlan plan = make_model_plan(cfg);
  if (voxels.size() != plan.patch_map.size())
    throw PreconditionError("forward: volume side does not match model side S=" + std::to_string(cfg.side));
  const std::size_t rows = cfg.cells(), e = cfg.embed, pv = cfg.patch_volume();
  const auto view = params.view();

  std::vector<T> patches(rows * pv);
  gather_patches<T>(voxels, plan.patch_map, patches);
  std::vector<T> z(rows * e);
  affine_forward<T>(patches, rows, view.embed, z);
  chain_inplace(z, params, plan, path);
  std::vector<T> normed(rows * e);
  layer_norm_forward<T>(z, rows, e, view.final_norm, normed, nullptr);
  affine_forward<T>(normed, rows, view.unembed, patches);
  std::vector<T> out(voxels.size());
  scatter_patches<T>(patches, plan.patch_map, out);
  return out;
}

Volume forward(const Volume& x, const ModelParams<float>& params, G2LPath path) {
  if (x.side != params.config.side)
    throw PreconditionError("forward: volume side " + std::to_string(x.side) + " does not match model side S=" +
                            std::to_string(params.config.side));
  return Volume(x.side, forward_values<float>(x.data, params, path));
}

#define G2L_INSTANTIATE(T)                                                                                  \
  template struct LayerParams<T>;                                                                        \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                             \
  template LayerParams<T> init_layer<T>(int, int, int, int, std::uint64_t);                              \
  template FeatureGrid<T> embed<T>(std::span<const T>, const ModelParams<T>&);                           \
  template FeatureGrid<T> window_attention<T>(const FeatureGrid<T>&, const WindowIdMap&,                 \
                                              AttentionView<const T>, int);                              \
  template FeatureGrid<T> g2l_attention_compactified<T>(const FeatureGrid<T>&, int, AttentionView<const T>, \
                                                        int);                                            \
  template FeatureGrid<T> feature_block<T>(const FeatureGrid<T>&, FeatureBlockView<const T>);            \
  template FeatureGrid<T> residual_layer<T>(const FeatureGrid<T>&, const WindowIdMap&, LayerView<const T>); \
  template FeatureGrid<T> residual_chain<T>(const FeatureGrid<T>&, const ModelParams<T>&, G2LPath);      \
  template std::vector<T> forward_values<T>(std::span<const T>, const ModelParams<T>&, G2LPath);

G2L_INSTANTIATE(float)
G2L_INSTANTIATE(double)

#undef G2L_INSTANTIATE

}  // namespace g2l
