#pragma once

// Row-wise building blocks of the transformer. Every forward function
// optionally records the intermediates its backward counterpart needs.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "g2l/params.hpp"
#include "g2l/windowing.hpp"

namespace g2l {

inline constexpr double kLayerNormEps = 1e-5;

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

template <class T>
T gelu_derivative(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
  const T pdf = T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
  return cdf + x * pdf;
}

/// Numerically stable in-place softmax (row max subtracted first).
template <class T>
void softmax_inplace(std::span<T> row);

template <class T>
void affine_forward(std::span<const T> x, std::size_t rows, AffineView<const T> a, std::span<T> y);

/// dx is overwritten when non-empty; weight and bias gradients accumulate.
template <class T>
void affine_backward(std::span<const T> x, std::size_t rows, AffineView<const T> a, std::span<const T> dy,
                     std::span<T> dx, AffineView<T> grad);

template <class T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> rstd;
};

template <class T>
void layer_norm_forward(std::span<const T> x, std::size_t rows, std::size_t width, NormView<const T> n,
                        std::span<T> y, NormCache<T>* cache);

template <class T>
void layer_norm_backward(std::span<const T> dy, std::size_t rows, std::size_t width, NormView<const T> n,
                         const NormCache<T>& cache, std::span<T> dx, NormView<T> grad);

/// Shared precomputation for windowed attention over one id map.
struct AttentionPlan {
  WindowPartition partition;
  std::vector<int> rel_index;  // window_volume^2 entries
};

AttentionPlan make_attention_plan(const WindowIdMap& ids);

template <class T>
struct AttentionCache {
  NormCache<T> norm;
  std::vector<T> normed;
  std::vector<T> qkv;
  std::vector<T> probs;  // [window][head][i][j]
  std::vector<T> heads_out;
  NormCache<T> proj_norm;
  std::vector<T> proj_in;
};

/// Windows write disjoint cells; `threads` > 1 spreads them over workers with
/// bit-identical results.
template <class T>
void attention_forward(std::span<const T> x, std::size_t rows, const AttentionPlan& plan,
                       AttentionView<const T> w, std::span<T> y, AttentionCache<T>* cache, int threads = 1);

/// dx is overwritten; parameter gradients accumulate.
template <class T>
void attention_backward(std::span<const T> dy, std::size_t rows, const AttentionPlan& plan,
                        AttentionView<const T> w, const AttentionCache<T>& cache, std::span<T> dx,
                        AttentionView<T> grad);

template <class T>
struct FeatureCache {
  NormCache<T> norm1;
  std::vector<T> c1;
  std::vector<T> h1;
  std::vector<T> g;
  NormCache<T> norm2;
  std::vector<T> c2;
};

template <class T>
void feature_block_forward(std::span<const T> x, std::size_t rows, FeatureBlockView<const T> w,
                           std::span<T> y, FeatureCache<T>* cache);

template <class T>
void feature_block_backward(std::span<const T> dy, std::size_t rows, FeatureBlockView<const T> w,
                            const FeatureCache<T>& cache, std::span<T> dx, FeatureBlockView<T> grad);

}  // namespace g2l
