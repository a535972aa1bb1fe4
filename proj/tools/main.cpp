#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "g2l/artifacts.hpp"
#include "g2l/bench.hpp"
#include "g2l/checkpoint.hpp"
#include "g2l/error.hpp"
#include "g2l/metrics.hpp"
#include "g2l/model.hpp"
#include "g2l/parallel.hpp"
#include "g2l/run_config.hpp"
#include "g2l/train.hpp"
#include "g2l/volume.hpp"
#include "g2l/windowing.hpp"

namespace fs = std::filesystem;
using namespace g2l;

namespace {

// Shared by subcommands that read a RunConfig: file first, then --set overrides.
struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override one config key (key=value), repeatable");
  }

  RunConfig load() const {
    RunConfig cfg = file.empty() ? RunConfig{} : load_run_config(file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw PreconditionError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

std::string phantom_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%04d.vol", index);
  return buf;
}

std::vector<Volume> load_dataset(const fs::path& dir) {
  if (dir.empty()) throw PreconditionError("data_dir is not set");
  if (!fs::is_directory(dir)) throw IoError("data directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".vol") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Volume> out;
  for (const auto& f : files) out.push_back(read_volume(f));
  return out;
}

std::vector<WindowScheme> parse_schedule(const std::string& text) {
  std::vector<WindowScheme> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(parse_scheme(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global-to-local windowed attention for volumetric artifact correction"};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate synthetic phantom volumes");
  int ph_count = 1, ph_size = 32, ph_ellipsoids = 4;
  std::uint64_t ph_seed = 0;
  std::string ph_out;
  phantom->add_option("--count", ph_count, "number of volumes")->check(CLI::NonNegativeNumber);
  phantom->add_option("--size", ph_size, "volume side S (>= 8)");
  phantom->add_option("--seed", ph_seed, "base seed");
  phantom->add_option("--ellipsoids", ph_ellipsoids, "ellipsoids per phantom");
  phantom->add_option("--out-dir", ph_out, "output directory")->required();

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "apply the Bernoulli artifact process");
  std::string co_in, co_out, co_recipe, co_replay;
  std::uint64_t co_seed = 0;
  ConfigOptions co_cfg;
  corrupt->add_option("--in", co_in, "clean VOL1 input")->required();
  corrupt->add_option("--out", co_out, "corrupted VOL1 output")->required();
  corrupt->add_option("--seed", co_seed, "process seed");
  corrupt->add_option("--recipe-out", co_recipe, "recipe output (default: <out>.recipe)");
  corrupt->add_option("--replay", co_replay, "replay this recipe instead of sampling")->check(CLI::ExistingFile);
  co_cfg.attach(corrupt);

  // train
  auto* train_cmd = app.add_subcommand("train", "train on a directory of clean volumes");
  ConfigOptions tr_cfg;
  tr_cfg.attach(train_cmd);
  std::string tr_data, tr_out, tr_resume;
  train_cmd->add_option("--data-dir", tr_data, "directory of clean .vol files");
  train_cmd->add_option("--out-dir", tr_out, "checkpoint and metric log directory");
  train_cmd->add_option("--resume", tr_resume, "checkpoint to resume from");

  // infer
  auto* infer = app.add_subcommand("infer", "run the model on one volume");
  std::string in_ckpt, in_in, in_out;
  infer->add_option("--checkpoint", in_ckpt, "checkpoint file")->required();
  infer->add_option("--in", in_in, "input VOL1")->required();
  infer->add_option("--out", in_out, "output VOL1")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "compare a test volume against a reference");
  std::string ev_ref, ev_test, ev_hf, ev_bap, ev_rac;
  eval->add_option("--ref", ev_ref, "reference VOL1")->required();
  eval->add_option("--test", ev_test, "test VOL1")->required();
  auto* hf = eval->add_option("--mask-hf", ev_hf, "mask from the artifact-free scan");
  auto* bap = eval->add_option("--mask-bap", ev_bap, "mask from the corrupted scan");
  auto* rac = eval->add_option("--mask-rac", ev_rac, "mask from the corrected scan");
  hf->needs(bap, rac);
  bap->needs(hf, rac);
  rac->needs(hf, bap);

  // analyze-context
  auto* analyze = app.add_subcommand("analyze-context", "layered receptive-field reachability");
  int an_grid = 16, an_window = 4, an_dims = 2;
  std::string an_schedule = "w,g2l";
  analyze->add_option("--grid", an_grid, "lattice side M");
  analyze->add_option("--window", an_window, "window length W");
  analyze->add_option("--dims", an_dims, "lattice dimension D");
  analyze->add_option("--schedule", an_schedule, "comma-separated schemes (w, sw, g2l)");

  // bench
  auto* bench = app.add_subcommand("bench", "time window assembly and attention paths");
  int be_grid = 16, be_window = 2, be_dims = 3, be_embed = 32, be_reps = 5;
  bool be_skip_attention = false;
  ConfigOptions be_cfg;
  bench->add_option("--grid", be_grid, "lattice side M for the permutation scenario");
  bench->add_option("--window", be_window, "window length W for the permutation scenario");
  bench->add_option("--dims", be_dims, "lattice dimension D for the permutation scenario");
  bench->add_option("--embed", be_embed, "feature width E for the permutation scenario");
  bench->add_option("--reps", be_reps, "timed repetitions (>= 5)");
  bench->add_flag("--permute-only", be_skip_attention, "skip the attention scenario");
  int be_threads = 1;
  bench->add_option("--threads", be_threads, "workers for the parallel window path (default 1)")
      ->check(CLI::PositiveNumber);
  be_cfg.attach(bench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*phantom) {
      if (ph_size < 8) throw PreconditionError("phantom side S=" + std::to_string(ph_size) + " must be >= 8");
      fs::create_directories(ph_out);
      for (int i = 0; i < ph_count; ++i) {
        PhantomSpec spec;
        spec.seed = mix_seed(ph_seed, static_cast<std::uint64_t>(i));
        spec.side = ph_size;
        spec.n_ellipsoids = ph_ellipsoids;
        write_volume(generate_phantom(spec), fs::path(ph_out) / phantom_name(i));
      }
    } else if (*corrupt) {
      const auto cfg = co_cfg.load();
      cfg.artifacts.validate();
      const Volume input = read_volume(co_in);
      if (!co_replay.empty()) {
        write_volume(replay(read_recipe(co_replay), input), co_out);
      } else {
        const auto [out, recipe] = bernoulli_process(input, cfg.artifacts, co_seed);
        write_volume(out, co_out);
        write_recipe(recipe, co_recipe.empty() ? co_out + ".recipe" : co_recipe);
        std::cout << "fired=" << recipe.fired_count() << '\n';
      }
    } else if (*train_cmd) {
      auto cfg = tr_cfg.load();
      if (!tr_data.empty()) cfg.data_dir = tr_data;
      if (!tr_out.empty()) cfg.out_dir = tr_out;
      if (!tr_resume.empty()) cfg.resume = tr_resume;
      cfg.validate();
      const auto dataset = load_dataset(cfg.data_dir);
      if (dataset.empty()) throw PreconditionError("dataset is empty: no .vol files in " + cfg.data_dir.string());
      std::optional<Checkpoint> resume;
      if (!cfg.resume.empty()) resume = read_checkpoint(cfg.resume);
      const auto result = train(dataset, cfg.model, cfg.optimizer, cfg.train, cfg.artifacts, cfg.out_dir,
                                resume ? &*resume : nullptr);
      for (const auto& row : result.log) std::cout << format_log_row(row) << '\n';
    } else if (*infer) {
      const auto ckpt = read_checkpoint(in_ckpt);
      write_volume(forward(read_volume(in_in), ckpt.params), in_out);
    } else if (*eval) {
      auto report = evaluate(read_volume(ev_ref), read_volume(ev_test));
      if (!ev_hf.empty()) report.dice_delta = dice_delta(read_mask(ev_hf), read_mask(ev_bap), read_mask(ev_rac));
      std::cout << format_report(report) << '\n';
    } else if (*analyze) {
      const auto schedule = parse_schedule(an_schedule);
      const auto report = context_reachability(an_grid, an_window, an_dims, schedule);
      for (const auto& layer : report.layers) std::cout << format_reach_line(layer) << '\n';
    } else if (*bench) {
      auto results = bench_permute(be_grid, be_window, be_dims, be_embed, be_reps);
      if (!be_skip_attention) {
        const auto cfg = be_cfg.load();
        const auto more = bench_attention_layer(cfg.model, be_reps, 0, be_threads);
        results.insert(results.end(), more.begin(), more.end());
      }
      std::cout << format_bench_table(results);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
