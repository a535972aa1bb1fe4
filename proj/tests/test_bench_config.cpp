#include <doctest.h>

#include <fstream>

#include "g2l/bench.hpp"
#include "g2l/error.hpp"
#include "g2l/run_config.hpp"
#include "support.hpp"

using namespace g2l;

TEST_CASE("bench_permute") {
  CHECK_THROWS_AS(bench_permute(8, 2, 3, 4, 4), PreconditionError);
  CHECK_THROWS_AS(bench_permute(8, 3, 3, 4, 5), PreconditionError);
  const auto r = bench_permute(16, 4, 3, 32, 5);
  REQUIRE(r.size() == 2);
  for (const auto& b : r) {
    CHECK(b.reps == 5);
    CHECK(b.median_us > 0);
    CHECK(b.cells_per_sec > 0);
  }
  CHECK(r[0].label == "permute/gather");
  CHECK(r[1].label == "permute/compactified");
}

TEST_CASE("bench_attention_layer") {
  ModelConfig c;
  c.side = 32;
  c.patch = 2;  // M = 16
  c.window = 4;
  const auto r = bench_attention_layer(c, 5);
  REQUIRE(r.size() == 3);
  CHECK(r[0].label == "attention/w-msa");
  CHECK(r[1].label == "attention/sw-msa");
  CHECK(r[2].label == "attention/g2l-msa");
  for (const auto& b : r) CHECK(b.cells_per_sec > 0);
  const auto table = format_bench_table(r);
  CHECK(table.find("attention/g2l-msa") != std::string::npos);
  CHECK_THROWS_AS(bench_attention_layer(c, 2), PreconditionError);
  CHECK(bench_attention_layer(c, 5, 0, 2).size() == 3);
}

TEST_CASE("config parsing") {
  const auto kv = parse_key_values("# comment\nside = 16\n\n  lr=0.5 # trailing\nout_dir = a b\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0] == std::pair<std::string, std::string>{"side", "16"});
  CHECK(kv[1] == std::pair<std::string, std::string>{"lr", "0.5"});
  CHECK(kv[2].second == "a b");
  CHECK_THROWS_AS(parse_key_values("side 16\n"), FormatError);
  CHECK_THROWS_AS(parse_key_values("= 16\n"), FormatError);

  RunConfig cfg;
  apply_setting(cfg, "side", "64");
  apply_setting(cfg, "mixing", "sw");
  apply_setting(cfg, "loss", "l1");
  apply_setting(cfg, "seed", "9");
  apply_setting(cfg, "p_all", "0");
  apply_setting(cfg, "p_ghosting", "0.5");
  CHECK(cfg.model.side == 64);
  CHECK(cfg.model.mixing == WindowScheme::sw_msa);
  CHECK(cfg.train.loss == LossKind::absolute);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.artifacts.seed == 9);
  CHECK(cfg.artifacts.probabilities[0] == 0.0);
  CHECK(cfg.artifacts.probabilities[7] == 0.5);
  CHECK_THROWS_AS(apply_setting(cfg, "sidee", "1"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(cfg, "side", "1.5"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(cfg, "p_nothing", "0.5"), PreconditionError);
  cfg.validate();
}

TEST_CASE("run config validation rejects exactly the divisibility constraints") {
  auto rejects = [](const std::string& key, const std::string& value, const std::string& needle) {
    RunConfig cfg;
    apply_setting(cfg, key, value);
    try {
      cfg.validate();
    } catch (const PreconditionError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(rejects("patch", "3", "must divide volume side"));
  CHECK(rejects("window", "3", "must divide grid side"));
  CHECK(rejects("heads", "5", "must divide embed"));
  CHECK(rejects("layers", "3", "must be even"));
  CHECK(rejects("split", "1", "split"));
  RunConfig ok;
  apply_setting(ok, "side", "64");
  apply_setting(ok, "patch", "8");
  apply_setting(ok, "window", "4");
  ok.validate();
}

TEST_CASE("config file") {
  test::TempDir dir("cfg");
  std::ofstream(dir / "run.cfg") << "side = 16\nmax_steps = 7\n";
  const auto cfg = load_run_config(dir / "run.cfg");
  CHECK(cfg.model.side == 16);
  CHECK(cfg.train.max_steps == 7);
  CHECK_THROWS_AS(load_run_config(dir / "none.cfg"), IoError);
}
