#pragma once

// Shared helpers for the unit tests: scratch directories and small seeded
// generators for the property tests.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "figo/image.hpp"
#include "figo/rng.hpp"
#include "figo/synth.hpp"

namespace figo::test {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("figo_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Uniform noise image in the given range; RawU8 values are whole numbers.
inline FingerprintImage random_image(Rng& rng, int w, int h, RangeTag tag) {
  FingerprintImage img(w, h, tag);
  const double lo = range_min(tag), hi = range_max(tag);
  for (double& v : img.pixels()) v = rng.uniform(lo, hi);
  if (tag == RangeTag::RawU8) {
    for (double& v : img.pixels()) v = std::round(v);
  }
  return img;
}

/// Seeded synthetic fingerprint in unit range.
inline FingerprintImage synthetic_unit(std::uint64_t seed, int size) {
  return normalize(synth_fingerprint(seed, size, size).image, RangeTag::Unit);
}

/// Relative error used by the finite-difference checks; the floor keeps
/// near-zero gradients from blowing the ratio up.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

}  // namespace figo::test
