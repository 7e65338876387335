#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "figo/image.hpp"

namespace figo {

/// Block-wise ridge direction. Angles are the direction the ridges run along
/// (perpendicular to the intensity gradient), in [0, pi).
struct OrientationField {
  int block_size = 16;
  int cols = 0;
  int rows = 0;
  std::vector<double> angles;
  std::vector<double> coherence;
  double coherence_threshold = 0.2;

  double angle(int bx, int by) const { return angles[static_cast<std::size_t>(by) * cols + bx]; }
  double coherence_at(int bx, int by) const {
    return coherence[static_cast<std::size_t>(by) * cols + bx];
  }
  bool reliable(int bx, int by) const { return coherence_at(bx, by) >= coherence_threshold; }
};

/// Block-wise ridge frequency in cycles/pixel; kInvalid marks failed blocks.
struct FrequencyField {
  static constexpr double kInvalid = -1.0;
  static constexpr double kMin = 1.0 / 25.0;
  static constexpr double kMax = 1.0 / 3.0;

  int block_size = 16;
  int cols = 0;
  int rows = 0;
  std::vector<double> freqs;

  double at(int bx, int by) const { return freqs[static_cast<std::size_t>(by) * cols + bx]; }
  bool valid(int bx, int by) const { return at(bx, by) != kInvalid; }
};

struct GaborParams {
  double sigma_x = 4.0;
  double sigma_y = 4.0;
  int kernel_radius = 12;

  // Throws SchemaViolation if sigmas are not positive or the kernel is
  // narrower than 3 sigma.
  void validate() const;
};

struct GaborSettings {
  int block_size = 16;
  double coherence_threshold = 0.2;
  GaborParams params;
};

/// Averaged squared gradients over each block. Throws ImageTooSmall when the
/// image holds fewer than 2x2 blocks.
OrientationField estimate_orientation(const FingerprintImage& img, int block_size = 16,
                                      double coherence_threshold = 0.2);

/// Oriented-window x-signature: the 16x32 window around each block centre is
/// projected on the ridge normal and local maxima are counted.
FrequencyField estimate_frequency(const FingerprintImage& img, const OrientationField& orient);

/// Even-symmetric, DC-free Gabor kernel, (2r+1)^2 row-major. `normal_angle` is
/// the direction of the sinusoid's wave vector. The kernel is scaled so that a
/// matched unit-amplitude cosine produces a unit-amplitude response.
std::vector<double> gabor_kernel(double normal_angle, double freq, const GaborParams& params);

/// Per-block filtering with the kernel tuned to that block. Unreliable or
/// invalid-frequency blocks copy the input through. Output is unit range.
FingerprintImage gabor_enhance(const FingerprintImage& img, const OrientationField& orient,
                               const FrequencyField& freqs, const GaborParams& params);

/// estimate_orientation + estimate_frequency + gabor_enhance. Output keeps the
/// input's dimensions and is tagged Unit.
FingerprintImage gabor_pipeline(const FingerprintImage& img, const GaborSettings& settings);

nlohmann::json to_json(const OrientationField& field);
nlohmann::json to_json(const FrequencyField& field);

}  // namespace figo
