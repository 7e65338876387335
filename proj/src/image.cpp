#include "figo/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "figo/error.hpp"

namespace figo {

std::string_view to_string(RangeTag tag) noexcept {
  switch (tag) {
    case RangeTag::RawU8: return "raw_u8";
    case RangeTag::Unit: return "unit";
    case RangeTag::Signed: return "signed";
  }
  return "unknown";
}

double range_min(RangeTag tag) noexcept {
  return tag == RangeTag::Signed ? -1.0 : 0.0;
}

double range_max(RangeTag tag) noexcept {
  return tag == RangeTag::RawU8 ? 255.0 : 1.0;
}

namespace {

void check_dims(int width, int height) {
  if (width < kMinImageSide || height < kMinImageSide) {
    throw Error(ErrorCode::BadDimensions,
                "image must be at least 16x16, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

}  // namespace

FingerprintImage::FingerprintImage(int width, int height, RangeTag tag, double fill)
    : width_(width), height_(height), tag_(tag) {
  check_dims(width, height);
  if (!(fill >= range_min(tag) && fill <= range_max(tag))) {
    throw Error(ErrorCode::BadDimensions, "fill value outside declared range");
  }
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

FingerprintImage::FingerprintImage(int width, int height, RangeTag tag,
                                   std::vector<double> pixels)
    : width_(width), height_(height), tag_(tag), pixels_(std::move(pixels)) {
  check_dims(width, height);
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::BadDimensions, "pixel count does not match width*height");
  }
  const double lo = range_min(tag);
  const double hi = range_max(tag);
  for (double v : pixels_) {
    if (!(v >= lo && v <= hi)) {
      throw Error(ErrorCode::BadDimensions,
                  "pixel value " + std::to_string(v) + " outside range " +
                      std::string(to_string(tag)));
    }
  }
}

void FingerprintImage::clamp_to_range() noexcept {
  const double lo = range_min(tag_);
  const double hi = range_max(tag_);
  for (double& v : pixels_) {
    v = std::isfinite(v) ? std::clamp(v, lo, hi) : lo;
  }
}

FingerprintImage normalize(const FingerprintImage& img, RangeTag target) {
  if (img.range() == target) return img;
  const double src_lo = range_min(img.range());
  const double src_span = range_max(img.range()) - src_lo;
  const double dst_lo = range_min(target);
  const double dst_span = range_max(target) - dst_lo;
  std::vector<double> out(img.size());
  auto in = img.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = (in[i] - src_lo) / src_span;
    out[i] = std::clamp(dst_lo + t * dst_span, dst_lo, dst_lo + dst_span);
  }
  return FingerprintImage(img.width(), img.height(), target, std::move(out));
}

FingerprintImage quantize_u8(const FingerprintImage& img) {
  FingerprintImage out = normalize(img, RangeTag::RawU8);
  for (double& v : out.pixels()) v = std::round(v);
  return out;
}

FingerprintImage resize(const FingerprintImage& img, int width, int height) {
  if (width < kMinImageSide || height < kMinImageSide) {
    throw Error(ErrorCode::BadDimensions, "resize target must be at least 16x16");
  }
  if (width == img.width() && height == img.height()) return img;

  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    fy -= y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      fx -= x0;
      // a + f*(b-a) keeps constant regions bit-exact.
      const double top = img.at(x0, y0) + fx * (img.at(x1, y0) - img.at(x0, y0));
      const double bot = img.at(x0, y1) + fx * (img.at(x1, y1) - img.at(x0, y1));
      out[static_cast<std::size_t>(y) * width + x] = top + fy * (bot - top);
    }
  }
  FingerprintImage res(width, height, img.range(), 0.0);
  std::copy(out.begin(), out.end(), res.pixels().begin());
  res.clamp_to_range();
  return res;
}

double ssim(const FingerprintImage& a, const FingerprintImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ShapeMismatch, "ssim: image dimensions differ");
  }
  const FingerprintImage ua = normalize(a, RangeTag::Unit);
  const FingerprintImage ub = normalize(b, RangeTag::Unit);
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;

  double window[2 * kRadius + 1][2 * kRadius + 1];
  double wsum = 0.0;
  for (int dy = -kRadius; dy <= kRadius; ++dy) {
    for (int dx = -kRadius; dx <= kRadius; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      window[dy + kRadius][dx + kRadius] = w;
      wsum += w;
    }
  }

  double total = 0.0;
  int count = 0;
  for (int cy = kRadius; cy < a.height() - kRadius; ++cy) {
    for (int cx = kRadius; cx < a.width() - kRadius; ++cx) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -kRadius; dy <= kRadius; ++dy) {
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const double w = window[dy + kRadius][dx + kRadius] / wsum;
          const double va = ua.at(cx + dx, cy + dy);
          const double vb = ub.at(cx + dx, cy + dy);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
      ++count;
    }
  }
  return total / count;
}

double mean_abs_diff(const FingerprintImage& a, const FingerprintImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::ShapeMismatch, "mean_abs_diff: image dimensions differ");
  }
  const FingerprintImage ua = normalize(a, RangeTag::Unit);
  const FingerprintImage ub = normalize(b, RangeTag::Unit);
  double sum = 0.0;
  for (std::size_t i = 0; i < ua.size(); ++i) sum += std::abs(ua.pixels()[i] - ub.pixels()[i]);
  return sum / static_cast<double>(ua.size());
}

}  // namespace figo
