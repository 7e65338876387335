#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace figo {

/// Declared value range of an image's pixels.
enum class RangeTag { RawU8, Unit, Signed };

std::string_view to_string(RangeTag tag) noexcept;
double range_min(RangeTag tag) noexcept;
double range_max(RangeTag tag) noexcept;

inline constexpr int kMinImageSide = 16;

/// Single-channel raster, row-major, with the value range it is expressed in.
///
/// Construction validates dimensions and range, so every live instance holds the
/// invariants: width, height >= 16; pixels.size() == width * height; every pixel
/// within [range_min(tag), range_max(tag)].
class FingerprintImage {
 public:
  FingerprintImage(int width, int height, RangeTag tag, double fill = 0.0);
  FingerprintImage(int width, int height, RangeTag tag, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  RangeTag range() const noexcept { return tag_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double at(int x, int y) const { return pixels_[index(x, y)]; }
  // Unchecked writer; callers keep values in range or call clamp_to_range().
  double& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  void clamp_to_range() noexcept;

  bool operator==(const FingerprintImage&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  RangeTag tag_;
  std::vector<double> pixels_;
};

/// Affine rescale into another range tag. Identity when the tag already matches.
FingerprintImage normalize(const FingerprintImage& img, RangeTag target);

/// Round to the nearest integer level; only meaningful for RawU8 images.
FingerprintImage quantize_u8(const FingerprintImage& img);

/// Bilinear resampling with pixel-centre alignment. Throws BadDimensions for
/// targets below 16 px.
FingerprintImage resize(const FingerprintImage& img, int width, int height);

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).
/// Both images must share dimensions; they are compared in unit range.
double ssim(const FingerprintImage& a, const FingerprintImage& b);

/// Mean absolute difference in unit range.
double mean_abs_diff(const FingerprintImage& a, const FingerprintImage& b);

// ---- raster I/O ----------------------------------------------------------

/// Reads PGM (P5/P2), PNG and BMP. Colour inputs are reduced to luminance with
/// Rec. 601 weights. The result is tagged RawU8.
FingerprintImage load_image(const std::filesystem::path& path);

/// Writes by extension: .pgm (binary P5), .png (8-bit gray), .bmp (8-bit
/// palettised gray). The image is converted to RawU8 and rounded first.
/// A comment (provenance) is written into PGM headers only.
void save_image(const FingerprintImage& img, const std::filesystem::path& path,
                std::string_view comment = {});

}  // namespace figo
