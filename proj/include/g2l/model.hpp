#pragma once

#include <span>
#include <vector>

#include "g2l/feature_grid.hpp"
#include "g2l/layers.hpp"
#include "g2l/params.hpp"
#include "g2l/volume.hpp"
#include "g2l/windowing.hpp"

namespace g2l {

/// How G2L layers assemble their windows: permute the grid once so every
/// window is a W-aligned block (compactified), or gather window cells through
/// the id map directly.
enum class G2LPath { compactified, gathered };

/// Window scheme of 1-based layer l: W-MSA for odd l, cfg.mixing for even l.
WindowScheme layer_scheme(const ModelConfig& cfg, int layer);

/// Shared per-config tables for a forward pass.
struct ModelPlan {
  std::vector<std::uint32_t> patch_map;
  AttentionPlan local;           // W-MSA layers
  AttentionPlan mixing;          // even layers, gathered through their id map
  PermutationTable compaction;   // invert_g2l, only meaningful for G2L mixing
};

ModelPlan make_model_plan(const ModelConfig& cfg);

/// Shared h1 applied to every patch (rows of length P^3). No absolute
/// positional term is added.
template <class T>
FeatureGrid<T> embed(std::span<const T> patches, const ModelParams<T>& params);
FeatureGrid<float> embed(const PatchGrid& g, const ModelParams<float>& params);

template <class T>
FeatureGrid<T> window_attention(const FeatureGrid<T>& x, const WindowIdMap& ids, AttentionView<const T> w,
                                int threads = 1);

/// G2L attention evaluated on the compactified grid: permute by invert_g2l,
/// run W-MSA attention on contiguous blocks, permute back.
template <class T>
FeatureGrid<T> g2l_attention_compactified(const FeatureGrid<T>& x, int window_len, AttentionView<const T> w,
                                          int threads = 1);

template <class T>
FeatureGrid<T> feature_block(const FeatureGrid<T>& x, FeatureBlockView<const T> w);

/// z + F(A(z)) with windows from `ids`.
template <class T>
FeatureGrid<T> residual_layer(const FeatureGrid<T>& z, const WindowIdMap& ids, LayerView<const T> w);

template <class T>
FeatureGrid<T> residual_chain(const FeatureGrid<T>& z0, const ModelParams<T>& params,
                              G2LPath path = G2LPath::compactified);

/// patchify -> h1 -> residual chain -> final norm -> h2 -> unpatchify, on raw
/// S^3 voxel buffers.
template <class T>
std::vector<T> forward_values(std::span<const T> voxels, const ModelParams<T>& params,
                              G2LPath path = G2LPath::compactified);

Volume forward(const Volume& x, const ModelParams<float>& params, G2LPath path = G2LPath::compactified);

}  // namespace g2l
