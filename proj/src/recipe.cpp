#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "g2l/artifacts.hpp"
#include "g2l/error.hpp"

namespace g2l {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void malformed(const std::string& what) {
  throw FormatError(FormatErrorKind::malformed, "malformed recipe: " + what);
}

template <class T>
T parse_number(std::string_view s) {
  T value{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) malformed("bad number '" + std::string(s) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string params_text(const ArtifactParams& params) {
  std::ostringstream os;
  if (auto* p = std::get_if<AnisotropyParams>(&params)) {
    os << " axis=" << p->axis << " factor=" << p->factor;
  } else if (auto* p = std::get_if<GammaParams>(&params)) {
    os << " gamma=" << fmt(p->gamma);
  } else if (auto* p = std::get_if<BiasFieldParams>(&params)) {
    os << " coefficients=";
    for (std::size_t i = 0; i < p->coefficients.size(); ++i) os << (i ? "," : "") << fmt(p->coefficients[i]);
  } else if (auto* p = std::get_if<MotionParams>(&params)) {
    os << " axis=" << p->axis << " shifts=";
    for (std::size_t i = 0; i < p->shifts.size(); ++i)
      os << (i ? ";" : "") << p->shifts[i].dx << ':' << p->shifts[i].dy << ':' << p->shifts[i].dz;
  } else if (auto* p = std::get_if<SpikingParams>(&params)) {
    os << " magnitude=" << fmt(p->magnitude) << " spikes=";
    for (std::size_t i = 0; i < p->spikes.size(); ++i) {
      const auto& s = p->spikes[i];
      os << (i ? ";" : "") << s.kx << ':' << s.ky << ':' << s.kz << ':' << fmt(s.phase);
    }
  } else if (auto* p = std::get_if<BlurParams>(&params)) {
    os << " sigma=" << fmt(p->sigma);
  } else if (auto* p = std::get_if<NoiseParams>(&params)) {
    os << " sigma=" << fmt(p->sigma) << " seed=" << p->seed;
  } else if (auto* p = std::get_if<GhostingParams>(&params)) {
    os << " axis=" << p->axis << " period=" << p->period << " intensity=" << fmt(p->intensity);
  }
  return os.str();
}

ArtifactParams parse_params(ArtifactType type, const std::map<std::string, std::string, std::less<>>& kv) {
  auto get = [&](const char* key) -> std::string_view {
    const auto it = kv.find(key);
    if (it == kv.end()) malformed(std::string("missing key '") + key + "'");
    return it->second;
  };
  switch (type) {
    case ArtifactType::anisotropy:
      return AnisotropyParams{parse_number<int>(get("axis")), parse_number<int>(get("factor"))};
    case ArtifactType::gamma:
      return GammaParams{parse_number<double>(get("gamma"))};
    case ArtifactType::bias_field: {
      BiasFieldParams p;
      for (auto c : split(get("coefficients"), ',')) p.coefficients.push_back(parse_number<double>(c));
      return p;
    }
    case ArtifactType::motion: {
      MotionParams p;
      p.axis = parse_number<int>(get("axis"));
      for (auto item : split(get("shifts"), ';')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) malformed("motion shift needs three components");
        p.shifts.push_back({parse_number<int>(parts[0]), parse_number<int>(parts[1]), parse_number<int>(parts[2])});
      }
      return p;
    }
    case ArtifactType::spiking: {
      SpikingParams p;
      p.magnitude = parse_number<double>(get("magnitude"));
      for (auto item : split(get("spikes"), ';')) {
        const auto parts = split(item, ':');
        if (parts.size() != 4) malformed("spike needs kx:ky:kz:phase");
        p.spikes.push_back({parse_number<int>(parts[0]), parse_number<int>(parts[1]), parse_number<int>(parts[2]),
                            parse_number<double>(parts[3])});
      }
      return p;
    }
    case ArtifactType::blur:
      return BlurParams{parse_number<double>(get("sigma"))};
    case ArtifactType::noise:
      return NoiseParams{parse_number<double>(get("sigma")), parse_number<std::uint64_t>(get("seed"))};
    case ArtifactType::ghosting:
      return GhostingParams{parse_number<int>(get("axis")), parse_number<int>(get("period")),
                            parse_number<double>(get("intensity"))};
  }
  malformed("unknown artifact type");
}

}  // namespace

std::string format_recipe(const ArtifactRecipe& r) {
  std::ostringstream os;
  os << "seed " << r.seed << '\n';
  for (const auto& step : r.steps) {
    os << artifact_tag(step.type) << ' ' << (step.fired ? 1 : 0);
    if (step.fired) os << params_text(step.params);
    os << '\n';
  }
  return os.str();
}

ArtifactRecipe parse_recipe(std::string_view text) {
  ArtifactRecipe r;
  bool have_seed = false;
  for (auto raw : split(text, '\n')) {
    std::string line(raw);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (!have_seed) {
      if (tag != "seed") malformed("first line must be 'seed <n>'");
      std::string value;
      is >> value;
      r.seed = parse_number<std::uint64_t>(value);
      have_seed = true;
      continue;
    }
    ArtifactStep step;
    step.type = parse_artifact_tag(tag);
    std::string fired;
    if (!(is >> fired) || (fired != "0" && fired != "1")) malformed("fired flag must be 0 or 1 for " + tag);
    step.fired = fired == "1";
    std::map<std::string, std::string, std::less<>> kv;
    std::string token;
    while (is >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) malformed("expected key=value, got '" + token + "'");
      kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    if (step.fired) step.params = parse_params(step.type, kv);
    r.steps.push_back(std::move(step));
  }
  if (!have_seed) malformed("missing seed line");
  return r;
}

void write_recipe(const ArtifactRecipe& r, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << format_recipe(r);
  if (!os) throw IoError("write failed: " + path.string());
}

ArtifactRecipe read_recipe(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_recipe(ss.str());
}

}  // namespace g2l
