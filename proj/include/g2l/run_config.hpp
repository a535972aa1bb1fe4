#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "g2l/artifacts.hpp"
#include "g2l/optimizer.hpp"
#include "g2l/params.hpp"
#include "g2l/train.hpp"

namespace g2l {

/// Everything a command needs. `seed` feeds both training and corruption.
struct RunConfig {
  ModelConfig model;
  OptimizerConfig optimizer;
  TrainConfig train;
  ArtifactConfig artifacts;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "run";
  std::filesystem::path resume;

  /// Validates every sub-config; the message names the violated constraint.
  void validate() const;
};

/// One `key = value` per line; `#` starts a comment; blank lines ignored.
/// Malformed lines raise FormatError naming the line number.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Sets one field by key. Unknown keys and unparsable values raise
/// PreconditionError naming the key.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Keys accepted by apply_setting, in documentation order.
std::vector<std::string_view> run_config_keys();

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace g2l
