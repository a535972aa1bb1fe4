#include "g2l/checkpoint.hpp"

#include <fstream>

#include "g2l/detail/binary_io.hpp"
#include "g2l/error.hpp"

namespace g2l {

namespace {

constexpr char kMagic[4] = {'G', '2', 'L', 'C'};
constexpr std::uint32_t kConfigFields = 8;

[[noreturn]] void truncated(const std::filesystem::path& path) {
  throw FormatError(FormatErrorKind::payload_length_mismatch, "checkpoint truncated: " + path.string());
}

void write_block(std::ostream& os, std::span<const float> values) {
  detail::write_le<std::uint64_t>(os, values.size());
  detail::write_floats(os, values);
}

std::vector<float> read_block(std::istream& is, std::size_t expected, const std::filesystem::path& path) {
  std::uint64_t len = 0;
  if (!detail::read_le(is, len)) truncated(path);
  if (len != expected)
    throw FormatError(FormatErrorKind::payload_length_mismatch,
                      "checkpoint tensor length " + std::to_string(len) + " does not match expected " +
                          std::to_string(expected) + ": " + path.string());
  std::vector<float> values(len);
  if (!detail::read_floats(is, values)) truncated(path);
  return values;
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto& cfg = ckpt.params.config;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, kConfigFields);
  for (int v : {cfg.side, cfg.patch, cfg.window, cfg.embed, cfg.heads, cfg.layers, cfg.dims,
                static_cast<int>(cfg.mixing)})
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));

  const auto specs = model_tensor_specs(cfg);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(specs.size()));
  std::size_t offset = 0;
  for (const auto& s : specs) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.name.size()));
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    write_block(os, std::span<const float>(ckpt.params.values).subspan(offset, s.size));
    offset += s.size;
  }

  detail::write_le<std::uint32_t>(os, ckpt.training ? 1u : 0u);
  if (ckpt.training) {
    detail::write_le<std::uint64_t>(os, ckpt.training->optimizer.t);
    detail::write_le<std::uint64_t>(os, ckpt.training->step);
    write_block(os, ckpt.training->optimizer.m);
    write_block(os, ckpt.training->optimizer.v);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[4] = {};
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic))
    throw FormatError(FormatErrorKind::bad_magic, "bad magic in checkpoint " + path.string());
  std::uint32_t version = 0, fields = 0;
  if (!detail::read_le(is, version)) truncated(path);
  if (version != kCheckpointVersion)
    throw FormatError(FormatErrorKind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                             " not supported (expected " +
                                                             std::to_string(kCheckpointVersion) + "): " + path.string());
  if (!detail::read_le(is, fields)) truncated(path);
  if (fields != kConfigFields) throw FormatError(FormatErrorKind::malformed, "unexpected config record in " + path.string());
  std::uint32_t f[kConfigFields];
  for (auto& v : f)
    if (!detail::read_le(is, v)) truncated(path);
  ModelConfig cfg;
  cfg.side = static_cast<int>(f[0]);
  cfg.patch = static_cast<int>(f[1]);
  cfg.window = static_cast<int>(f[2]);
  cfg.embed = static_cast<int>(f[3]);
  cfg.heads = static_cast<int>(f[4]);
  cfg.layers = static_cast<int>(f[5]);
  cfg.dims = static_cast<int>(f[6]);
  if (f[7] > 2) throw FormatError(FormatErrorKind::malformed, "unknown mixing scheme in " + path.string());
  cfg.mixing = static_cast<WindowScheme>(f[7]);
  try {
    cfg.validate();
  } catch (const PreconditionError& e) {
    throw FormatError(FormatErrorKind::malformed, std::string("invalid config in checkpoint: ") + e.what());
  }

  Checkpoint ckpt{ModelParams<float>(cfg), std::nullopt};
  const auto specs = model_tensor_specs(cfg);
  std::uint32_t count = 0;
  if (!detail::read_le(is, count)) truncated(path);
  if (count != specs.size()) throw FormatError(FormatErrorKind::malformed, "tensor count mismatch in " + path.string());
  std::size_t offset = 0;
  for (const auto& s : specs) {
    std::uint32_t name_len = 0;
    if (!detail::read_le(is, name_len) || name_len > 4096) truncated(path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) truncated(path);
    if (name != s.name)
      throw FormatError(FormatErrorKind::malformed, "expected tensor '" + s.name + "', found '" + name + "'");
    const auto block = read_block(is, s.size, path);
    std::copy(block.begin(), block.end(), ckpt.params.values.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += s.size;
  }

  std::uint32_t has_training = 0;
  if (!detail::read_le(is, has_training)) truncated(path);
  if (has_training) {
    TrainingSnapshot snap;
    if (!detail::read_le(is, snap.optimizer.t) || !detail::read_le(is, snap.step)) truncated(path);
    snap.optimizer.m = read_block(is, ckpt.params.values.size(), path);
    snap.optimizer.v = read_block(is, ckpt.params.values.size(), path);
    ckpt.training = std::move(snap);
  }
  return ckpt;
}

}  // namespace g2l
