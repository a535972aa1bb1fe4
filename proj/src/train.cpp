#include "g2l/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "g2l/error.hpp"
#include "g2l/metrics.hpp"
#include "g2l/model.hpp"
#include "g2l/parallel.hpp"

namespace g2l {

namespace {

constexpr std::uint64_t kTestStream = 0x7e57;
constexpr std::uint64_t kEpochStream = 0xe90c;
constexpr std::uint64_t kCorruptStream = 0xc022;

template <class T>
std::vector<T> to_values(const Volume& v) {
  return std::vector<T>(v.data.begin(), v.data.end());
}

template <class T>
T sample_gradient(const TrainingPair& pair, const ModelParams<T>& params, LossKind kind, ModelParams<T>& grad, T weight) {
  if (pair.input.side != params.config.side || pair.target.side != params.config.side)
    throw PreconditionError("training pair side does not match model side S=" + std::to_string(params.config.side));
  if constexpr (std::is_same_v<T, float>) {
    return accumulate_gradient<float>(pair.input.data, pair.target.data, params, kind, grad, weight);
  } else {
    const auto x = to_values<T>(pair.input);
    const auto y = to_values<T>(pair.target);
    return accumulate_gradient<T>(x, y, params, kind, grad, weight);
  }
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw PreconditionError("learning_rate must be finite and non-negative");
  if (!(beta1 >= 0 && beta1 < 1)) throw PreconditionError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw PreconditionError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) throw PreconditionError("epsilon must be positive");
  if (accumulation_steps < 1) throw PreconditionError("accumulation_steps must be >= 1");
}

void TrainConfig::validate() const {
  if (!(split > 0 && split < 1)) throw PreconditionError("split must lie in (0, 1)");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (max_steps < 0) throw PreconditionError("max_steps must be >= 0");
  if (log_interval < 1) throw PreconditionError("log_interval must be >= 1");
  if (checkpoint_interval < 0) throw PreconditionError("checkpoint_interval must be >= 0");
}

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state, const OptimizerConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw PreconditionError("adam_step: parameter, gradient and moment sizes must agree");
  ++state.t;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = b1 * state.m[i] + (1 - b1) * g;
    const double v = b2 * state.v[i] + (1 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    params[i] = static_cast<T>(params[i] - cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon));
  }
}

template <class T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, OptimizerState<T>& state,
               const OptimizerConfig& cfg) {
  adam_step<T>(std::span<T>(params.values), std::span<const T>(grads.values), state, cfg);
}

template <class T>
ModelParams<T> batch_gradient(std::span<const TrainingPair> batch, const ModelParams<T>& params, LossKind kind,
                              double* loss_out) {
  if (batch.empty()) throw PreconditionError("batch must be nonempty");
  ModelParams<T> grad(params.config);
  const T w = T(1) / static_cast<T>(batch.size());
  double total = 0;
  for (const auto& pair : batch) total += sample_gradient<T>(pair, params, kind, grad, w);
  if (loss_out) *loss_out = total / static_cast<double>(batch.size());
  return grad;
}

template <class T>
ModelParams<T> accumulated_gradient(std::span<const TrainingPair> batch, const ModelParams<T>& params,
                                    int accumulation_steps, LossKind kind, double* loss_out) {
  if (accumulation_steps < 1) throw PreconditionError("accumulation_steps must be >= 1");
  if (batch.empty() || batch.size() % static_cast<std::size_t>(accumulation_steps) != 0)
    throw PreconditionError("batch size " + std::to_string(batch.size()) +
                            " must be a positive multiple of accumulation_steps " + std::to_string(accumulation_steps));
  const std::size_t k = static_cast<std::size_t>(accumulation_steps);
  const std::size_t b = batch.size() / k;

  std::vector<ModelParams<T>> per_sample(batch.size(), ModelParams<T>(params.config));
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    losses[i] = sample_gradient<T>(batch[i], params, kind, per_sample[i], T(1));
  });

  ModelParams<T> total(params.config);
  std::vector<T> micro(total.values.size());
  const T inv_b = T(1) / static_cast<T>(b);
  const T inv_k = T(1) / static_cast<T>(k);
  for (std::size_t m = 0; m < k; ++m) {
    std::fill(micro.begin(), micro.end(), T(0));
    for (std::size_t i = m * b; i < (m + 1) * b; ++i)
      for (std::size_t j = 0; j < micro.size(); ++j) micro[j] += per_sample[i].values[j];
    for (std::size_t j = 0; j < micro.size(); ++j) total.values[j] += micro[j] * inv_b * inv_k;
  }
  if (loss_out) *loss_out = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  return total;
}

double accumulate_and_step(std::span<const TrainingPair> batch, ModelParams<float>& params,
                           OptimizerState<float>& state, const OptimizerConfig& cfg, LossKind kind) {
  cfg.validate();
  double loss_mean = 0;
  const auto grad = accumulated_gradient<float>(batch, params, cfg.accumulation_steps, kind, &loss_mean);
  adam_step(params, grad, state, cfg);
  return loss_mean;
}

EvalScores evaluate_pairs(std::span<const TrainingPair> pairs, const ModelParams<float>& params) {
  EvalScores s;
  if (pairs.empty()) return s;
  for (const auto& p : pairs) {
    const Volume out = forward(p.input, params);
    s.psnr += psnr(p.target, out);
    s.ssim += p.target.side >= 7 ? ssim3(p.target, out) : std::nan("");
  }
  s.psnr /= static_cast<double>(pairs.size());
  s.ssim /= static_cast<double>(pairs.size());
  return s;
}

std::string format_log_row(const LogRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu\t%.8g\t%.6f\t%.6f", static_cast<unsigned long long>(row.step), row.train_loss,
                row.test_psnr, row.test_ssim);
  return buf;
}

TrainSession::TrainSession(ModelParams<float> params, OptimizerConfig opt, TrainConfig train, ArtifactConfig artifacts,
                           std::vector<Volume> clean_train, std::vector<TrainingPair> test)
    : params_(std::move(params)),
      state_(params_.values.size()),
      opt_(opt),
      train_(train),
      artifacts_(std::move(artifacts)),
      clean_(std::move(clean_train)),
      test_(std::move(test)) {
  opt_.validate();
  train_.validate();
  artifacts_.validate();
  if (clean_.empty()) throw PreconditionError("training set must be nonempty");
}

TrainSession::TrainSession(ModelParams<float> params, OptimizerConfig opt, TrainConfig train,
                           std::vector<TrainingPair> fixed_train, std::vector<TrainingPair> test)
    : params_(std::move(params)),
      state_(params_.values.size()),
      opt_(opt),
      train_(train),
      fixed_(std::move(fixed_train)),
      test_(std::move(test)) {
  opt_.validate();
  train_.validate();
  if (fixed_.empty()) throw PreconditionError("training set must be nonempty");
}

std::size_t TrainSession::sample_count() const { return clean_.empty() ? fixed_.size() : clean_.size(); }

std::size_t TrainSession::effective_batch() const {
  return static_cast<std::size_t>(train_.batch_size) * static_cast<std::size_t>(opt_.accumulation_steps);
}

std::vector<TrainingPair> TrainSession::next_batch() const {
  const std::uint64_t n = sample_count();
  const std::uint64_t B = effective_batch();
  std::vector<TrainingPair> batch;
  batch.reserve(B);
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> order(n);
  for (std::uint64_t slot = 0; slot < B; ++slot) {
    const std::uint64_t p = step_ * B + slot;
    const std::uint64_t epoch = p / n;
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(mix_seed(train_.seed, kEpochStream, epoch));
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
      cached_epoch = epoch;
    }
    const std::size_t idx = order[p % n];
    if (clean_.empty()) {
      batch.push_back(fixed_[idx]);
    } else {
      auto corrupted = bernoulli_process(clean_[idx], artifacts_, mix_seed(train_.seed ^ kCorruptStream, epoch, idx));
      batch.push_back({std::move(corrupted.first), clean_[idx]});
    }
  }
  return batch;
}

double TrainSession::step() {
  const auto batch = next_batch();
  const double l = accumulate_and_step(batch, params_, state_, opt_, train_.loss);
  ++step_;
  return l;
}

EvalScores TrainSession::evaluate() const { return evaluate_pairs(test_, params_); }

Checkpoint TrainSession::checkpoint() const { return Checkpoint{params_, TrainingSnapshot{state_, step_}}; }

void TrainSession::restore(const Checkpoint& ckpt) {
  if (!(ckpt.params.config == params_.config)) throw PreconditionError("checkpoint model config does not match session");
  params_ = ckpt.params;
  if (ckpt.training) {
    state_ = ckpt.training->optimizer;
    step_ = ckpt.training->step;
  } else {
    state_ = OptimizerState<float>(params_.values.size());
    step_ = 0;
  }
}

DatasetSplit split_dataset(const std::vector<Volume>& dataset, double fraction, std::uint64_t seed) {
  if (dataset.empty()) throw PreconditionError("dataset must be nonempty");
  if (!(fraction > 0 && fraction < 1)) throw PreconditionError("split must lie in (0, 1)");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, kTestStream));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

  DatasetSplit s;
  if (dataset.size() == 1) {
    s.train = dataset;
    s.test = dataset;
    return s;
  }
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, dataset.size() - 1);
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? s.train : s.test).push_back(dataset[order[i]]);
  return s;
}

TrainResult train(const std::vector<Volume>& dataset, const ModelConfig& model, const OptimizerConfig& opt,
                  const TrainConfig& cfg, const ArtifactConfig& artifacts, const std::filesystem::path& out_dir,
                  const Checkpoint* resume) {
  if (dataset.empty()) throw PreconditionError("dataset must be nonempty");
  model.validate();
  opt.validate();
  cfg.validate();
  artifacts.validate();
  for (const auto& v : dataset)
    if (v.side != model.side)
      throw PreconditionError("dataset volume side " + std::to_string(v.side) + " does not match S=" +
                              std::to_string(model.side));

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  const auto log_path = out_dir / "metrics.tsv";
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write to output path: " + log_path.string());

  auto split = split_dataset(dataset, cfg.split, cfg.seed);
  std::vector<TrainingPair> test;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    auto corrupted = bernoulli_process(split.test[i], artifacts, mix_seed(cfg.seed, kTestStream, i));
    test.push_back({std::move(corrupted.first), split.test[i]});
  }

  TrainSession session(init_params<float>(model, cfg.seed), opt, cfg, artifacts, std::move(split.train),
                       std::move(test));
  if (resume) session.restore(*resume);

  TrainResult result;
  if (!resume) log << "step\ttrain_loss\ttest_psnr\ttest_ssim\n";
  double interval_loss = 0;
  int interval_steps = 0;
  auto save = [&](const std::filesystem::path& p) { write_checkpoint(session.checkpoint(), p); };
  while (session.steps_done() < static_cast<std::uint64_t>(cfg.max_steps)) {
    interval_loss += session.step();
    ++interval_steps;
    const auto s = session.steps_done();
    if (s % static_cast<std::uint64_t>(cfg.log_interval) == 0 || s == static_cast<std::uint64_t>(cfg.max_steps)) {
      const auto scores = session.evaluate();
      LogRow row{s, interval_loss / interval_steps, scores.psnr, scores.ssim};
      result.log.push_back(row);
      log << format_log_row(row) << '\n' << std::flush;
      interval_loss = 0;
      interval_steps = 0;
    }
    if (cfg.checkpoint_interval > 0 && s % static_cast<std::uint64_t>(cfg.checkpoint_interval) == 0)
      save(out_dir / ("checkpoint_" + std::to_string(s) + ".g2lc"));
  }
  save(out_dir / "final.g2lc");
  result.params = session.params();
  return result;
}

#define G2L_INSTANTIATE(T)                                                                                         \
  template void adam_step<T>(std::span<T>, std::span<const T>, OptimizerState<T>&, const OptimizerConfig&);        \
  template void adam_step<T>(ModelParams<T>&, const ModelParams<T>&, OptimizerState<T>&, const OptimizerConfig&);  \
  template ModelParams<T> batch_gradient<T>(std::span<const TrainingPair>, const ModelParams<T>&, LossKind,        \
                                            double*);                                                              \
  template ModelParams<T> accumulated_gradient<T>(std::span<const TrainingPair>, const ModelParams<T>&, int,       \
                                                  LossKind, double*);
G2L_INSTANTIATE(float)
G2L_INSTANTIATE(double)
#undef G2L_INSTANTIATE

}  // namespace g2l
