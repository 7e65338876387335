#pragma once

#include <array>
#include <cstdint>

#include "figo/gabor.hpp"
#include "figo/image.hpp"

namespace figo {

/// Parameters of one synthetic finger. The wave-normal angle at centred
/// coordinates p is theta(p) = base_angle + sum_j amp_j * sin(2*pi*(k_j . p)/64 + phase_j)
/// and the intensity is
/// 0.5 + 0.5 * cos(2*pi*f*(px*cos(theta) + py*sin(theta)) + phase_noise(p)).
struct RidgePattern {
  struct Wave {
    double amplitude = 0.0;
    double kx = 0.0;  // cycles per 64 px
    double ky = 0.0;
    double phase = 0.0;
  };

  double base_angle = 0.0;
  double wavelength = 10.0;  // px
  std::array<Wave, 3> orientation_waves{};
  std::array<Wave, 2> phase_waves{};

  double normal_angle(double px, double py) const;
  double phase_noise(double px, double py) const;
};

/// Capture-to-capture variation of one impression of the same finger.
struct ImpressionJitter {
  double dx = 0.0;
  double dy = 0.0;
  double rotation = 0.0;  // radians
  double contrast = 1.0;
  double noise_sigma = 0.0;  // unit-range additive Gaussian noise
  std::uint64_t noise_seed = 0;
};

struct SynthResult {
  FingerprintImage image;
  OrientationField ground_truth;  // ridge direction (wave normal + pi/2)
};

RidgePattern pattern_from_seed(std::uint64_t seed);
RidgePattern constant_pattern(double normal_angle, double wavelength);
ImpressionJitter jitter_from_seed(std::uint64_t seed);

/// Renders a pattern into a RawU8 image (rounded levels) together with the
/// block-sampled ground-truth orientation field (block 16, coherence 1).
SynthResult render_pattern(const RidgePattern& pattern, int width, int height,
                           const ImpressionJitter& jitter = {}, int block_size = 16);

/// Seeded synthetic fingerprint without capture jitter. Throws BadDimensions
/// below 32x32.
SynthResult synth_fingerprint(std::uint64_t seed, int width, int height);

}  // namespace figo
