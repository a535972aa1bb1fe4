#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "g2l/artifacts.hpp"
#include "g2l/autodiff.hpp"
#include "g2l/checkpoint.hpp"
#include "g2l/optimizer.hpp"
#include "g2l/params.hpp"
#include "g2l/volume.hpp"

namespace g2l {

struct TrainConfig {
  LossKind loss = LossKind::squared;
  int batch_size = 2;
  int max_steps = 2000;
  std::uint64_t seed = 0;
  double split = 0.8;
  int log_interval = 50;
  /// 0 writes only the final checkpoint.
  int checkpoint_interval = 0;

  void validate() const;
};

/// (corrupted input, clean target).
struct TrainingPair {
  Volume input;
  Volume target;
};

/// Bias-corrected Adam. Increments state.t before computing the correction.
template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state, const OptimizerConfig& cfg);

template <class T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, OptimizerState<T>& state,
               const OptimizerConfig& cfg);

/// Gradient of the batch mean loss in one pass. `loss_out` receives the mean loss.
template <class T>
ModelParams<T> batch_gradient(std::span<const TrainingPair> batch, const ModelParams<T>& params, LossKind kind,
                              double* loss_out = nullptr);

/// Mean over `accumulation_steps` contiguous micro-batches of each
/// micro-batch's mean-loss gradient. Per-sample gradients may be computed in
/// parallel; the reduction order is fixed.
template <class T>
ModelParams<T> accumulated_gradient(std::span<const TrainingPair> batch, const ModelParams<T>& params,
                                    int accumulation_steps, LossKind kind, double* loss_out = nullptr);

/// accumulated_gradient followed by one Adam step. Returns the batch mean loss.
double accumulate_and_step(std::span<const TrainingPair> batch, ModelParams<float>& params,
                           OptimizerState<float>& state, const OptimizerConfig& cfg,
                           LossKind kind = LossKind::squared);

struct EvalScores {
  double psnr = 0;
  double ssim = 0;
};

/// Mean PSNR and SSIM of forward(input) against target.
EvalScores evaluate_pairs(std::span<const TrainingPair> pairs, const ModelParams<float>& params);

struct LogRow {
  std::uint64_t step = 0;
  double train_loss = 0;
  double test_psnr = 0;
  double test_ssim = 0;
};

std::string format_log_row(const LogRow& row);

/// Owns parameters and optimizer state for one training run. Sample order is
/// epoch-based: global sample position p = step * B + slot, where B is
/// batch_size * accumulation_steps; epoch p / n draws a fresh permutation.
/// With a clean-volume source each (epoch, sample) gets a fresh corruption.
class TrainSession {
 public:
  TrainSession(ModelParams<float> params, OptimizerConfig opt, TrainConfig train, ArtifactConfig artifacts,
               std::vector<Volume> clean_train, std::vector<TrainingPair> test);
  TrainSession(ModelParams<float> params, OptimizerConfig opt, TrainConfig train, std::vector<TrainingPair> fixed_train,
               std::vector<TrainingPair> test);

  /// One optimizer step; returns the batch mean loss.
  double step();

  std::uint64_t steps_done() const { return step_; }
  std::size_t effective_batch() const;
  std::vector<TrainingPair> next_batch() const;
  EvalScores evaluate() const;

  const ModelParams<float>& params() const { return params_; }
  const OptimizerState<float>& optimizer() const { return state_; }
  Checkpoint checkpoint() const;
  /// Restores parameters, optimizer state and step counter. Configs must match.
  void restore(const Checkpoint& ckpt);

 private:
  std::size_t sample_count() const;

  ModelParams<float> params_;
  OptimizerState<float> state_;
  OptimizerConfig opt_;
  TrainConfig train_;
  ArtifactConfig artifacts_;
  std::vector<Volume> clean_;
  std::vector<TrainingPair> fixed_;
  std::vector<TrainingPair> test_;
  std::uint64_t step_ = 0;
};

struct DatasetSplit {
  std::vector<Volume> train;
  std::vector<Volume> test;
};

/// Deterministic shuffle then split. The test side is never empty when the
/// dataset has at least two volumes; a single volume serves both sides.
DatasetSplit split_dataset(const std::vector<Volume>& dataset, double fraction, std::uint64_t seed);

struct TrainResult {
  ModelParams<float> params;
  std::vector<LogRow> log;
};

/// Full run: split, corrupt, optimise, log and checkpoint into out_dir
/// (metrics.tsv, checkpoint_<step>.g2lc, final.g2lc).
TrainResult train(const std::vector<Volume>& dataset, const ModelConfig& model, const OptimizerConfig& opt,
                  const TrainConfig& cfg, const ArtifactConfig& artifacts, const std::filesystem::path& out_dir,
                  const Checkpoint* resume = nullptr);

}  // namespace g2l
