#pragma once

#include <span>

#include "g2l/model.hpp"
#include "g2l/params.hpp"
#include "g2l/volume.hpp"

namespace g2l {

enum class LossKind { squared, absolute };

/// Mean over voxels of (pred - target)^2 or |pred - target|.
template <class T>
T loss_value(std::span<const T> pred, std::span<const T> target, LossKind kind);

double loss(const Volume& pred, const Volume& target, LossKind kind = LossKind::squared);

/// Runs the forward pass with a tape, then the reverse sweep. Adds
/// `weight * d loss / d theta` into `grad` (same layout as params) and
/// returns the loss.
template <class T>
T accumulate_gradient(std::span<const T> input, std::span<const T> target, const ModelParams<T>& params,
                      LossKind kind, ModelParams<T>& grad, T weight = T(1));

/// Exact reverse-mode gradient of loss(forward(x), target).
template <class T>
ModelParams<T> backward(std::span<const T> input, std::span<const T> target, const ModelParams<T>& params,
                        LossKind kind = LossKind::squared);

ModelParams<float> backward(const Volume& x, const Volume& target, const ModelParams<float>& params,
                            LossKind kind = LossKind::squared);

}  // namespace g2l
