#include "g2l/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "g2l/error.hpp"

namespace g2l {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class N>
N parse_number(std::string_view key, std::string_view value) {
  N out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw PreconditionError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  return out;
}

LossKind parse_loss(std::string_view v) {
  if (v == "mse" || v == "squared") return LossKind::squared;
  if (v == "l1" || v == "absolute") return LossKind::absolute;
  throw PreconditionError("invalid value '" + std::string(v) + "' for key 'loss' (expected mse or l1)");
}

constexpr std::string_view kKeys[] = {
    "side", "patch", "window", "embed", "heads", "layers", "mixing",
    "lr", "beta1", "beta2", "epsilon", "accumulation_steps",
    "loss", "batch_size", "max_steps", "seed", "split", "log_interval", "checkpoint_interval",
    "p_all", "p_<artifact>", "data_dir", "out_dir", "resume",
};

}  // namespace

void RunConfig::validate() const {
  model.validate();
  optimizer.validate();
  train.validate();
  artifacts.validate();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto key = eq == std::string_view::npos ? std::string_view{} : trim(line.substr(0, eq));
    if (key.empty())
      throw FormatError(FormatErrorKind::malformed,
                        "config line " + std::to_string(line_no) + ": expected 'key = value'");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  auto& m = cfg.model;
  auto& o = cfg.optimizer;
  auto& t = cfg.train;
  if (key == "side") m.side = parse_number<int>(key, value);
  else if (key == "patch") m.patch = parse_number<int>(key, value);
  else if (key == "window") m.window = parse_number<int>(key, value);
  else if (key == "embed") m.embed = parse_number<int>(key, value);
  else if (key == "heads") m.heads = parse_number<int>(key, value);
  else if (key == "layers") m.layers = parse_number<int>(key, value);
  else if (key == "mixing") {
    try {
      m.mixing = parse_scheme(value);
    } catch (const std::exception&) {
      throw PreconditionError("invalid value '" + std::string(value) + "' for key 'mixing'");
    }
  } else if (key == "lr") o.learning_rate = parse_number<double>(key, value);
  else if (key == "beta1") o.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") o.beta2 = parse_number<double>(key, value);
  else if (key == "epsilon") o.epsilon = parse_number<double>(key, value);
  else if (key == "accumulation_steps") o.accumulation_steps = parse_number<int>(key, value);
  else if (key == "loss") t.loss = parse_loss(value);
  else if (key == "batch_size") t.batch_size = parse_number<int>(key, value);
  else if (key == "max_steps") t.max_steps = parse_number<int>(key, value);
  else if (key == "seed") t.seed = cfg.artifacts.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "split") t.split = parse_number<double>(key, value);
  else if (key == "log_interval") t.log_interval = parse_number<int>(key, value);
  else if (key == "checkpoint_interval") t.checkpoint_interval = parse_number<int>(key, value);
  else if (key == "p_all") cfg.artifacts.probabilities.fill(parse_number<double>(key, value));
  else if (key.starts_with("p_")) {
    ArtifactType type;
    try {
      type = parse_artifact_tag(key.substr(2));
    } catch (const std::exception&) {
      throw PreconditionError("unknown config key '" + std::string(key) + "'");
    }
    cfg.artifacts.probabilities[static_cast<std::size_t>(type)] = parse_number<double>(key, value);
  } else if (key == "data_dir") cfg.data_dir = std::string(value);
  else if (key == "out_dir") cfg.out_dir = std::string(value);
  else if (key == "resume") cfg.resume = std::string(value);
  else throw PreconditionError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string_view> run_config_keys() { return {std::begin(kKeys), std::end(kKeys)}; }

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(ss.str())) apply_setting(cfg, k, v);
  return cfg;
}

}  // namespace g2l
