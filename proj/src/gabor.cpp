#include "figo/gabor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "figo/error.hpp"

namespace figo {
namespace {

constexpr double kPi = std::numbers::pi;

double fold_angle(double a) {
  a = std::fmod(a, kPi);
  if (a < 0) a += kPi;
  if (a >= kPi) a = 0.0;
  return a;
}

double clamped(const FingerprintImage& img, int x, int y) {
  return img.at(std::clamp(x, 0, img.width() - 1), std::clamp(y, 0, img.height() - 1));
}

double bilinear(const FingerprintImage& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0) + fx * (img.at(x1, y0) - img.at(x0, y0));
  const double bot = img.at(x0, y1) + fx * (img.at(x1, y1) - img.at(x0, y1));
  return top + fy * (bot - top);
}

int blocks_along(int extent, int block) { return (extent + block - 1) / block; }

struct BlockSpan {
  int x0, y0, x1, y1;  // half-open
  double cx() const { return (x0 + x1 - 1) / 2.0; }
  double cy() const { return (y0 + y1 - 1) / 2.0; }
};

BlockSpan block_span(const FingerprintImage& img, int block, int bx, int by) {
  return {bx * block, by * block, std::min((bx + 1) * block, img.width()),
          std::min((by + 1) * block, img.height())};
}

}  // namespace

void GaborParams::validate() const {
  if (!(sigma_x > 0 && sigma_y > 0)) {
    throw Error(ErrorCode::SchemaViolation, "gabor sigmas must be positive");
  }
  if (kernel_radius < 3.0 * std::max(sigma_x, sigma_y)) {
    throw Error(ErrorCode::SchemaViolation, "gabor kernel_radius must cover 3 sigma");
  }
}

OrientationField estimate_orientation(const FingerprintImage& input, int block_size,
                                      double coherence_threshold) {
  if (block_size < 4) throw Error(ErrorCode::ImageTooSmall, "block_size must be >= 4");
  const FingerprintImage img = normalize(input, RangeTag::Unit);
  OrientationField field;
  field.block_size = block_size;
  field.coherence_threshold = coherence_threshold;
  field.cols = blocks_along(img.width(), block_size);
  field.rows = blocks_along(img.height(), block_size);
  if (field.cols < 2 || field.rows < 2) {
    throw Error(ErrorCode::ImageTooSmall, "orientation estimation needs at least 2x2 blocks");
  }
  field.angles.assign(static_cast<std::size_t>(field.cols) * field.rows, 0.0);
  field.coherence.assign(field.angles.size(), 0.0);

  for (int by = 0; by < field.rows; ++by) {
    for (int bx = 0; bx < field.cols; ++bx) {
      const BlockSpan span = block_span(img, block_size, bx, by);
      double sxx = 0, syy = 0, sxy = 0;
      for (int y = span.y0; y < span.y1; ++y) {
        for (int x = span.x0; x < span.x1; ++x) {
          // Sobel
          const double gx = (clamped(img, x + 1, y - 1) + 2 * clamped(img, x + 1, y) +
                             clamped(img, x + 1, y + 1)) -
                            (clamped(img, x - 1, y - 1) + 2 * clamped(img, x - 1, y) +
                             clamped(img, x - 1, y + 1));
          const double gy = (clamped(img, x - 1, y + 1) + 2 * clamped(img, x, y + 1) +
                             clamped(img, x + 1, y + 1)) -
                            (clamped(img, x - 1, y - 1) + 2 * clamped(img, x, y - 1) +
                             clamped(img, x + 1, y - 1));
          sxx += gx * gx;
          syy += gy * gy;
          sxy += gx * gy;
        }
      }
      const std::size_t i = static_cast<std::size_t>(by) * field.cols + bx;
      const double energy = sxx + syy;
      if (energy < 1e-12) {
        field.angles[i] = 0.0;
        field.coherence[i] = 0.0;
        continue;
      }
      field.angles[i] = fold_angle(0.5 * std::atan2(2 * sxy, sxx - syy) + kPi / 2);
      field.coherence[i] =
          std::clamp(std::hypot(sxx - syy, 2 * sxy) / energy, 0.0, 1.0);
    }
  }
  return field;
}

FrequencyField estimate_frequency(const FingerprintImage& input, const OrientationField& orient) {
  const FingerprintImage img = normalize(input, RangeTag::Unit);
  FrequencyField out;
  out.block_size = orient.block_size;
  out.cols = blocks_along(img.width(), orient.block_size);
  out.rows = blocks_along(img.height(), orient.block_size);
  if (out.cols != orient.cols || out.rows != orient.rows) {
    throw Error(ErrorCode::FieldShapeMismatch, "orientation field does not match image");
  }
  out.freqs.assign(static_cast<std::size_t>(out.cols) * out.rows, FrequencyField::kInvalid);

  constexpr int kLength = 32;  // along the ridge normal
  constexpr int kWidth = 16;   // along the ridge
  for (int by = 0; by < out.rows; ++by) {
    for (int bx = 0; bx < out.cols; ++bx) {
      if (!orient.reliable(bx, by)) continue;
      const BlockSpan span = block_span(img, out.block_size, bx, by);
      const double ridge = orient.angle(bx, by);
      const double rx = std::cos(ridge), ry = std::sin(ridge);
      const double nx = -ry, ny = rx;

      double sig[kLength];
      for (int k = 0; k < kLength; ++k) {
        const double u = k - (kLength - 1) / 2.0;
        double acc = 0.0;
        for (int d = 0; d < kWidth; ++d) {
          const double v = d - (kWidth - 1) / 2.0;
          acc += bilinear(img, span.cx() + u * nx + v * rx, span.cy() + u * ny + v * ry);
        }
        sig[k] = acc / kWidth;
      }
      const auto [lo, hi] = std::minmax_element(sig, sig + kLength);
      if (*hi - *lo < 1e-3) continue;
      double mean = 0.0;
      for (double s : sig) mean += s;
      mean /= kLength;

      double first = -1, last = -1;
      int peaks = 0;
      for (int k = 1; k < kLength - 1; ++k) {
        if (sig[k] > sig[k - 1] && sig[k] >= sig[k + 1] && sig[k] > mean) {
          // Parabolic refinement of the peak position.
          const double denom = sig[k - 1] - 2 * sig[k] + sig[k + 1];
          const double offset = denom != 0.0 ? 0.5 * (sig[k - 1] - sig[k + 1]) / denom : 0.0;
          const double pos = k + std::clamp(offset, -0.5, 0.5);
          if (peaks == 0) first = pos;
          last = pos;
          ++peaks;
        }
      }
      if (peaks < 2 || last <= first) continue;
      const double f = (peaks - 1) / (last - first);
      if (f >= FrequencyField::kMin && f <= FrequencyField::kMax) {
        out.freqs[static_cast<std::size_t>(by) * out.cols + bx] = f;
      }
    }
  }
  return out;
}

std::vector<double> gabor_kernel(double normal_angle, double freq, const GaborParams& params) {
  const int r = params.kernel_radius;
  const int side = 2 * r + 1;
  const double c = std::cos(normal_angle), s = std::sin(normal_angle);
  std::vector<double> kernel(static_cast<std::size_t>(side) * side);
  std::vector<double> carrier(kernel.size());
  double sum = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double xp = x * c + y * s;
      const double yp = -x * s + y * c;
      const double env = std::exp(-0.5 * (xp * xp / (params.sigma_x * params.sigma_x) +
                                          yp * yp / (params.sigma_y * params.sigma_y)));
      const std::size_t i = static_cast<std::size_t>(y + r) * side + (x + r);
      carrier[i] = std::cos(2 * kPi * freq * xp);
      kernel[i] = env * carrier[i];
      sum += kernel[i];
    }
  }
  const double mean = sum / static_cast<double>(kernel.size());
  double gain = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    kernel[i] -= mean;
    gain += kernel[i] * carrier[i];
  }
  if (gain > 1e-12) {
    for (double& k : kernel) k /= gain;
  }
  return kernel;
}

FingerprintImage gabor_enhance(const FingerprintImage& input, const OrientationField& orient,
                               const FrequencyField& freqs, const GaborParams& params) {
  params.validate();
  const FingerprintImage img = normalize(input, RangeTag::Unit);
  const int cols = blocks_along(img.width(), orient.block_size);
  const int rows = blocks_along(img.height(), orient.block_size);
  if (orient.cols != cols || orient.rows != rows || freqs.cols != cols || freqs.rows != rows ||
      freqs.block_size != orient.block_size ||
      orient.angles.size() != static_cast<std::size_t>(cols) * rows ||
      freqs.freqs.size() != orient.angles.size()) {
    throw Error(ErrorCode::FieldShapeMismatch,
                "orientation/frequency fields do not match a " + std::to_string(img.width()) +
                    "x" + std::to_string(img.height()) + " image");
  }

  FingerprintImage out = img;
  const int r = params.kernel_radius;
  const int side = 2 * r + 1;
  for (int by = 0; by < rows; ++by) {
    for (int bx = 0; bx < cols; ++bx) {
      if (!orient.reliable(bx, by) || !freqs.valid(bx, by)) continue;
      const std::vector<double> kernel =
          gabor_kernel(orient.angle(bx, by) - kPi / 2, freqs.at(bx, by), params);
      const BlockSpan span = block_span(img, orient.block_size, bx, by);
      for (int y = span.y0; y < span.y1; ++y) {
        for (int x = span.x0; x < span.x1; ++x) {
          double acc = 0.0;
          for (int ky = -r; ky <= r; ++ky) {
            const double* krow = &kernel[static_cast<std::size_t>(ky + r) * side];
            for (int kx = -r; kx <= r; ++kx) acc += krow[kx + r] * clamped(img, x + kx, y + ky);
          }
          out.at(x, y) = std::clamp(0.5 + acc, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

FingerprintImage gabor_pipeline(const FingerprintImage& img, const GaborSettings& settings) {
  const OrientationField orient =
      estimate_orientation(img, settings.block_size, settings.coherence_threshold);
  const FrequencyField freqs = estimate_frequency(img, orient);
  return gabor_enhance(img, orient, freqs, settings.params);
}

nlohmann::json to_json(const OrientationField& field) {
  return {{"block_size", field.block_size}, {"cols", field.cols},
          {"rows", field.rows},             {"angles", field.angles},
          {"coherence", field.coherence},   {"coherence_threshold", field.coherence_threshold}};
}

nlohmann::json to_json(const FrequencyField& field) {
  nlohmann::json freqs = nlohmann::json::array();
  for (double f : field.freqs) freqs.push_back(f == FrequencyField::kInvalid ? nlohmann::json() : nlohmann::json(f));
  return {{"block_size", field.block_size}, {"cols", field.cols}, {"rows", field.rows},
          {"freqs", freqs}};
}

}  // namespace figo
