#include "figo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "figo/error.hpp"
#include "figo/rng.hpp"

namespace figo {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kReferenceSide = 64.0;

double wave_sum(std::span<const RidgePattern::Wave> waves, double px, double py) {
  double acc = 0.0;
  for (const auto& w : waves) {
    acc += w.amplitude *
           std::sin(2 * kPi * (w.kx * px + w.ky * py) / kReferenceSide + w.phase);
  }
  return acc;
}

double fold(double a) {
  a = std::fmod(a, kPi);
  if (a < 0) a += kPi;
  return a >= kPi ? 0.0 : a;
}

}  // namespace

double RidgePattern::normal_angle(double px, double py) const {
  return base_angle + wave_sum(orientation_waves, px, py);
}

double RidgePattern::phase_noise(double px, double py) const {
  return wave_sum(phase_waves, px, py);
}

RidgePattern pattern_from_seed(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x52494447ULL));
  RidgePattern p;
  p.base_angle = rng.uniform(0.0, kPi);
  p.wavelength = rng.uniform(8.0, 12.0);
  for (auto& w : p.orientation_waves) {
    w.amplitude = rng.uniform(0.15, 0.45);
    w.kx = rng.uniform(-1.2, 1.2);
    w.ky = rng.uniform(-1.2, 1.2);
    w.phase = rng.uniform(0.0, 2 * kPi);
  }
  for (auto& w : p.phase_waves) {
    w.amplitude = rng.uniform(0.5, 1.5);
    w.kx = rng.uniform(-1.5, 1.5);
    w.ky = rng.uniform(-1.5, 1.5);
    w.phase = rng.uniform(0.0, 2 * kPi);
  }
  return p;
}

RidgePattern constant_pattern(double normal_angle, double wavelength) {
  RidgePattern p;
  p.base_angle = normal_angle;
  p.wavelength = wavelength;
  return p;
}

ImpressionJitter jitter_from_seed(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4A495454ULL));
  ImpressionJitter j;
  j.dx = rng.uniform(-2.0, 2.0);
  j.dy = rng.uniform(-2.0, 2.0);
  j.rotation = rng.uniform(-4.0, 4.0) * kPi / 180.0;
  j.contrast = rng.uniform(0.8, 1.0);
  j.noise_sigma = 0.04;
  j.noise_seed = derive_seed(seed, 0x4E4F4953ULL);
  return j;
}

SynthResult render_pattern(const RidgePattern& pattern, int width, int height,
                           const ImpressionJitter& jitter, int block_size) {
  if (width < 32 || height < 32) {
    throw Error(ErrorCode::BadDimensions, "synthetic fingerprints need at least 32x32 pixels");
  }
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double cr = std::cos(jitter.rotation), sr = std::sin(jitter.rotation);
  const double freq = 1.0 / pattern.wavelength;
  Rng noise(jitter.noise_seed);

  // Image point -> finger coordinates (inverse of rotate-then-translate).
  auto to_finger = [&](double x, double y) {
    const double qx = x - cx - jitter.dx;
    const double qy = y - cy - jitter.dy;
    return std::pair{cr * qx + sr * qy, -sr * qx + cr * qy};
  };

  std::vector<double> levels(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto [px, py] = to_finger(x, y);
      const double theta = pattern.normal_angle(px, py);
      const double phase = 2 * kPi * freq * (px * std::cos(theta) + py * std::sin(theta)) +
                           pattern.phase_noise(px, py);
      double v = 0.5 + 0.5 * jitter.contrast * std::cos(phase);
      if (jitter.noise_sigma > 0) v += noise.normal(0.0, jitter.noise_sigma);
      levels[static_cast<std::size_t>(y) * width + x] =
          std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    }
  }

  OrientationField gt;
  gt.block_size = block_size;
  gt.cols = (width + block_size - 1) / block_size;
  gt.rows = (height + block_size - 1) / block_size;
  gt.angles.resize(static_cast<std::size_t>(gt.cols) * gt.rows);
  gt.coherence.assign(gt.angles.size(), 1.0);
  for (int by = 0; by < gt.rows; ++by) {
    for (int bx = 0; bx < gt.cols; ++bx) {
      const double x = (bx * block_size + std::min((bx + 1) * block_size, width) - 1) / 2.0;
      const double y = (by * block_size + std::min((by + 1) * block_size, height) - 1) / 2.0;
      const auto [px, py] = to_finger(x, y);
      gt.angles[static_cast<std::size_t>(by) * gt.cols + bx] =
          fold(pattern.normal_angle(px, py) + jitter.rotation + kPi / 2);
    }
  }
  return {FingerprintImage(width, height, RangeTag::RawU8, std::move(levels)), std::move(gt)};
}

SynthResult synth_fingerprint(std::uint64_t seed, int width, int height) {
  ImpressionJitter mild;
  mild.noise_sigma = 0.0;
  return render_pattern(pattern_from_seed(seed), width, height, mild);
}

}  // namespace figo
