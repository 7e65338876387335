#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "figo/error.hpp"
#include "figo/image.hpp"
#include "support.hpp"

using namespace figo;
using figo::test::TempDir;

namespace {

// Minimal PNG writer (stored deflate blocks) so colour decoding can be
// checked against bytes that libpng did not produce.
std::uint32_t crc32(const std::string& data) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (unsigned char b : data) {
    c ^= b;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
  }
  return c ^ 0xFFFFFFFFu;
}

void put32(std::string& s, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xFF));
}

void chunk(std::string& png, const std::string& type, const std::string& body) {
  put32(png, static_cast<std::uint32_t>(body.size()));
  const std::string typed = type + body;
  png += typed;
  put32(png, crc32(typed));
}

std::string rgb_png(int w, int h, std::array<unsigned char, 3> rgb) {
  std::string raw;
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    for (int x = 0; x < w; ++x) raw.append(reinterpret_cast<const char*>(rgb.data()), 3);
  }
  std::string z = "\x78\x01";
  std::size_t pos = 0;
  do {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - pos);
    const bool last = pos + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<char>(n & 0xFF));
    z.push_back(static_cast<char>(n >> 8));
    z.push_back(static_cast<char>(~n & 0xFF));
    z.push_back(static_cast<char>((~n >> 8) & 0xFF));
    z.append(raw, pos, n);
    pos += n;
  } while (pos < raw.size());
  std::uint32_t a = 1, b = 0;
  for (unsigned char c : raw) {
    a = (a + c) % 65521;
    b = (b + a) % 65521;
  }
  put32(z, (b << 16) | a);

  std::string ihdr;
  put32(ihdr, static_cast<std::uint32_t>(w));
  put32(ihdr, static_cast<std::uint32_t>(h));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  std::string png = "\x89PNG\r\n\x1a\n";
  chunk(png, "IHDR", ihdr);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", "");
  return png;
}

}  // namespace

TEST_CASE("image invariants are enforced at construction") {
  CHECK_THROWS_AS(FingerprintImage(15, 16, RangeTag::Unit), Error);
  CHECK_THROWS_AS(FingerprintImage(16, 16, RangeTag::Unit, std::vector<double>(10, 0.0)), Error);
  CHECK_THROWS_AS(FingerprintImage(16, 16, RangeTag::Unit, std::vector<double>(256, 1.5)), Error);
  CHECK_NOTHROW(FingerprintImage(16, 16, RangeTag::Signed, std::vector<double>(256, -1.0)));
}

TEST_CASE("normalize maps range endpoints") {
  FingerprintImage img(16, 16, RangeTag::RawU8, 0.0);
  img.at(3, 4) = 255.0;
  const auto s = normalize(img, RangeTag::Signed);
  CHECK(s.range() == RangeTag::Signed);
  CHECK(s.at(0, 0) == -1.0);
  CHECK(s.at(3, 4) == 1.0);
  CHECK(normalize(s, RangeTag::Signed) == s);
}

TEST_CASE("resize examples") {
  Rng rng(5);
  const auto img = figo::test::random_image(rng, 96, 103, RangeTag::RawU8);
  CHECK(resize(img, 96, 103) == img);
  const auto small = resize(img, 64, 64);
  CHECK(small.width() == 64);
  CHECK(small.height() == 64);
  CHECK(small.range() == RangeTag::RawU8);
  CHECK_THROWS_AS(resize(img, 8, 64), Error);
}

TEST_CASE("raster files") {
  TempDir dir("image");
  Rng rng(11);

  SUBCASE("PGM header echo and lossless round trip") {
    const auto img = figo::test::random_image(rng, 96, 103, RangeTag::RawU8);
    save_image(img, dir / "a.pgm");
    const auto back = load_image(dir / "a.pgm");
    CHECK(back.width() == 96);
    CHECK(back.height() == 103);
    CHECK(back.range() == RangeTag::RawU8);
    CHECK(back == img);
  }
  SUBCASE("PGM comments are skipped on load") {
    const auto img = figo::test::random_image(rng, 16, 16, RangeTag::RawU8);
    save_image(img, dir / "c.pgm", "line one\nline two");
    CHECK(figo::test::read_file(dir / "c.pgm").find("# line two") != std::string::npos);
    CHECK(load_image(dir / "c.pgm") == img);
  }
  SUBCASE("all-zero PGM") {
    save_image(FingerprintImage(16, 16, RangeTag::RawU8, 0.0), dir / "z.pgm");
    const auto z = load_image(dir / "z.pgm");
    const auto [lo, hi] = std::minmax_element(z.pixels().begin(), z.pixels().end());
    CHECK(*lo == 0.0);
    CHECK(*hi == 0.0);
  }
  SUBCASE("PNG and BMP round trip at 8 bit") {
    const auto img = figo::test::random_image(rng, 33, 17, RangeTag::RawU8);
    save_image(img, dir / "a.png");
    save_image(img, dir / "a.bmp");
    CHECK(load_image(dir / "a.png") == img);
    CHECK(load_image(dir / "a.bmp") == img);
  }
  SUBCASE("white RGB PNG decodes to luminance 255") {
    figo::test::write_file(dir / "white.png", rgb_png(20, 18, {255, 255, 255}));
    const auto img = load_image(dir / "white.png");
    CHECK(img.width() == 20);
    CHECK(img.height() == 18);
    for (double v : img.pixels()) REQUIRE(v == 255.0);
  }
  SUBCASE("errors") {
    auto code_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::IoError;
    };
    CHECK(code_of([&] { load_image(dir / "missing.pgm"); }) == ErrorCode::FileNotFound);
    figo::test::write_file(dir / "x.tif", "II*");
    CHECK(code_of([&] { load_image(dir / "x.tif"); }) == ErrorCode::UnsupportedFormat);
    figo::test::write_file(dir / "bad.pgm", "P5\n16 abc\n255\n");
    CHECK(code_of([&] { load_image(dir / "bad.pgm"); }) == ErrorCode::CorruptHeader);
  }
}

TEST_SUITE("property") {
  TEST_CASE("normalize round trip stays within one level") {
    Rng rng(0x1A2B);
    for (int trial = 0; trial < 50; ++trial) {
      const int w = 16 + static_cast<int>(rng.below(40));
      const int h = 16 + static_cast<int>(rng.below(40));
      const auto img = figo::test::random_image(rng, w, h, RangeTag::Unit);
      for (RangeTag via : {RangeTag::RawU8, RangeTag::Signed}) {
        const auto back = normalize(normalize(img, via), RangeTag::Unit);
        for (std::size_t i = 0; i < img.size(); ++i) {
          REQUIRE(std::abs(back.pixels()[i] - img.pixels()[i]) <= 1.0 / 255.0);
        }
        const auto q = normalize(quantize_u8(normalize(img, RangeTag::RawU8)), RangeTag::Unit);
        for (std::size_t i = 0; i < img.size(); ++i) {
          REQUIRE(std::abs(q.pixels()[i] - img.pixels()[i]) <= 1.0 / 255.0);
        }
      }
      const auto raw = figo::test::random_image(rng, w, h, RangeTag::RawU8);
      const auto raw_back = quantize_u8(normalize(normalize(raw, RangeTag::Signed), RangeTag::RawU8));
      REQUIRE(raw_back == raw);
    }
  }

  TEST_CASE("resize keeps constant images exactly constant") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
      const double value = std::round(rng.uniform(0, 255));
      const FingerprintImage img(16 + static_cast<int>(rng.below(80)), 16 + static_cast<int>(rng.below(80)),
                                 RangeTag::RawU8, value);
      const auto out = resize(img, 16 + static_cast<int>(rng.below(80)), 16 + static_cast<int>(rng.below(80)));
      for (double v : out.pixels()) REQUIRE(v == value);
    }
  }
}
