#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "figo/dataset.hpp"
#include "figo/degrade.hpp"
#include "figo/oneshot.hpp"
#include "figo/pix2pix.hpp"

namespace figo {

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t pix2pix = 2;
  std::uint64_t oneshot = 3;
  std::uint64_t eval = 4;
};

struct SyntheticData {
  int subjects = 50;
  int impressions = 4;
};

struct RunPaths {
  std::optional<std::filesystem::path> data_root;  // SOCOFing-style tree
  std::optional<std::filesystem::path> pix2pix_checkpoint;
  std::optional<std::filesystem::path> oneshot_checkpoint;
};

/// Everything an experiment run depends on. The per-model seed fields are
/// driven by `seeds`; the pix2pix/oneshot sections carry no seed of their own.
struct RunConfig {
  int resolution = 64;
  Seeds seeds;
  Pix2PixTrainConfig pix2pix;
  OneshotConfig oneshot;
  LevelTable level_table;
  SplitRatios split;
  SyntheticData synthetic;
  RunPaths paths;

  /// Pushes the seeds into the model sections.
  void sync_seeds();
  void validate() const;
};

/// Canonical form; parse(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& cfg);
/// Fills defaults, rejects unknown keys, validates. Throws SchemaViolation.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Throws ConfigNotFound, or SchemaViolation for unparsable JSON.
RunConfig load_config(const std::filesystem::path& path);

/// Reads the config embedded in the '#' header of a results.csv.
RunConfig config_from_results(const std::filesystem::path& csv);

}  // namespace figo
