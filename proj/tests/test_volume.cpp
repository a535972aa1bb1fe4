#include <doctest.h>

#include <fstream>
#include <numeric>

#include "g2l/error.hpp"
#include "g2l/volume.hpp"
#include "support.hpp"

using namespace g2l;
using g2l::test::random_volume;
using g2l::test::TempDir;

TEST_CASE("patchify shapes") {
  const auto v = random_volume(4, 1);
  const auto g = patchify(v, 2);
  CHECK(g.grid_side == 2);
  CHECK(g.cells() == 8);
  CHECK(g.patch_volume() == 8);

  const auto whole = patchify(v, 4);
  CHECK(whole.cells() == 1);
  CHECK(whole.data == v.data);
}

TEST_CASE("patchify places the sub-block with origin (aP, bP, cP)") {
  const int S = 8, P = 2, M = 4;
  Volume v(S);
  std::iota(v.data.begin(), v.data.end(), 0.0f);
  const auto g = patchify(v, P);
  for (int c = 0; c < M; ++c)
    for (int b = 0; b < M; ++b)
      for (int a = 0; a < M; ++a) {
        const auto patch = g.patch(static_cast<std::size_t>(a + M * (b + M * c)));
        for (int z = 0; z < P; ++z)
          for (int y = 0; y < P; ++y)
            for (int x = 0; x < P; ++x)
              REQUIRE(patch[static_cast<std::size_t>(x + P * (y + P * z))] == v.at(a * P + x, b * P + y, c * P + z));
      }
}

TEST_CASE("patchify and unpatchify are inverse bijections") {
  for (int S : {4, 8, 16})
    for (int P = 1; P <= S; ++P) {
      if (S % P) continue;
      CAPTURE(S);
      CAPTURE(P);
      const auto map = patch_index_map(S, P);
      std::vector<int> hits(map.size(), 0);
      for (auto i : map) ++hits[i];
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
      const auto v = random_volume(S, static_cast<std::uint64_t>(S * 31 + P));
      CHECK(unpatchify(patchify(v, P)) == v);
    }
}

TEST_CASE("unpatchify of constant patches is block-constant") {
  PatchGrid g{2, 2, std::vector<float>(64)};
  for (std::size_t cell = 0; cell < 8; ++cell)
    for (std::size_t i = 0; i < 8; ++i) g.data[cell * 8 + i] = static_cast<float>(cell + 1);
  const auto v = unpatchify(g);
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(v.at(x, y, z) == static_cast<float>(1 + x / 2 + 2 * (y / 2) + 4 * (z / 2)));

  Volume c(8, 0.3f);
  CHECK(unpatchify(patchify(c, 4)) == c);
}

TEST_CASE("patchify rejects a non-dividing patch length and names S and P") {
  const auto v = random_volume(8, 2);
  try {
    (void)patchify(v, 3);
    FAIL("expected PreconditionError");
  } catch (const PreconditionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("8") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

TEST_CASE("phantom generation") {
  PhantomSpec spec;
  spec.seed = 11;
  const auto a = generate_phantom(spec);
  const auto b = generate_phantom(spec);
  CHECK(a == b);
  CHECK(a.side == 32);
  CHECK(a.all_finite());
  const auto [lo, hi] = std::minmax_element(a.data.begin(), a.data.end());
  CHECK(*lo >= 0.0f);
  CHECK(*hi <= 1.0f);
  CHECK(*hi - *lo > 0.5f);

  spec.seed = 12;
  CHECK(generate_phantom(spec) != a);

  PhantomSpec flat{5, 16, 0, 0};
  const auto c = generate_phantom(flat);
  CHECK(std::all_of(c.data.begin(), c.data.end(), [&](float x) { return x == c.data[0]; }));

  PhantomSpec small{1, 7, 2, 1};
  CHECK_THROWS_AS(generate_phantom(small), PreconditionError);
}

TEST_CASE("VOL1 round trip is bit-exact") {
  TempDir dir("vol");
  const auto v = random_volume(16, 3, -5.0f, 5.0f);
  write_volume(v, dir / "a.vol");
  const auto r = read_volume(dir / "a.vol");
  CHECK(r == v);
  CHECK(std::filesystem::file_size(dir / "a.vol") == 17 + 4 * 16 * 16 * 16);
}

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

FormatErrorKind read_error(const std::filesystem::path& p) {
  try {
    (void)read_volume(p);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected FormatError");
  return FormatErrorKind::malformed;
}

}  // namespace

TEST_CASE("VOL1 header errors are distinct") {
  TempDir dir("vol_err");
  const auto v = random_volume(4, 4);
  write_volume(v, dir / "good.vol");
  const auto good = read_bytes(dir / "good.vol");

  auto truncated = good;
  truncated.resize(truncated.size() - 4);
  write_bytes(dir / "trunc.vol", truncated);
  CHECK(read_error(dir / "trunc.vol") == FormatErrorKind::payload_length_mismatch);
  try {
    (void)read_volume(dir / "trunc.vol");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("payload length mismatch") != std::string::npos);
  }

  auto magic = good;
  magic[0] = 'X';
  write_bytes(dir / "magic.vol", magic);
  CHECK(read_error(dir / "magic.vol") == FormatErrorKind::bad_magic);
  try {
    (void)read_volume(dir / "magic.vol");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
  }

  auto dtype = good;
  dtype[16] = 7;
  write_bytes(dir / "dtype.vol", dtype);
  CHECK(read_error(dir / "dtype.vol") == FormatErrorKind::unsupported_dtype);

  auto extra = good;
  extra.push_back(0);
  write_bytes(dir / "extra.vol", extra);
  CHECK(read_error(dir / "extra.vol") == FormatErrorKind::payload_length_mismatch);

  auto aniso = good;
  aniso[4] = 2;  // dx = 2, dy = dz = 4
  aniso.resize(17 + 4 * 2 * 4 * 4);
  write_bytes(dir / "aniso.vol", aniso);
  CHECK(read_error(dir / "aniso.vol") == FormatErrorKind::unsupported_shape);

  CHECK_THROWS_AS(read_volume(dir / "missing.vol"), IoError);
}
