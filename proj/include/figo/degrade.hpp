#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "figo/dataset.hpp"
#include "figo/image.hpp"

namespace figo {

/// Per-level numeric severity, indexed easy/medium/hard.
struct LevelTable {
  std::array<std::pair<double, double>, 3> occlusion_band{{{0.05, 0.10}, {0.15, 0.25}, {0.35, 0.45}}};
  std::array<double, 3> rotation_deg{15.0, 45.0, 90.0};
  std::array<double, 3> cut_width_px{2.0, 4.0, 8.0};

  /// Throws SchemaViolation unless every parameter strictly increases with
  /// level (bands must not overlap) and bands lie within [0, 1].
  void validate() const;
};

nlohmann::json to_json(const LevelTable& table);
LevelTable level_table_from_json(const nlohmann::json& j);

struct DegradeParams {
  AlterationKind kind = AlterationKind::Obliteration;
  Level level = Level::Easy;
  std::uint64_t seed = 0;
  LevelTable level_table;
  // Test/diagnostic overrides of the table value for this level.
  std::optional<double> angle_override_deg;
  std::optional<double> width_override_px;
};

/// 90th-percentile intensity; fingerprints are dark ridges on a light ground.
double background_intensity(const FingerprintImage& img);

/// Elliptical blobs at background intensity covering a fraction of the image
/// drawn uniformly from the level's band.
FingerprintImage obliterate(const FingerprintImage& img, const DegradeParams& params);

/// Rotates the centred disk of radius 0.35*min(w,h) by the level angle; the
/// sign is drawn from the seed.
FingerprintImage rotate_central(const FingerprintImage& img, const DegradeParams& params);

/// Burns a three-stroke Z polyline of the level width at background intensity.
FingerprintImage z_cut(const FingerprintImage& img, const DegradeParams& params);

/// Dispatches on params.kind. Kind None returns the input unchanged.
FingerprintImage degrade(const FingerprintImage& img, const DegradeParams& params);

/// Signed rotation angle (degrees) rotate_central would use for these params.
double rotation_angle_deg(const DegradeParams& params);

}  // namespace figo
