#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "figo/config.hpp"
#include "figo/dataset.hpp"
#include "figo/gabor.hpp"
#include "figo/image.hpp"
#include "figo/oneshot.hpp"
#include "figo/pix2pix.hpp"

namespace figo {

enum class EnhanceMethod { None, Gabor, Pix2Pix, GaborThenPix2Pix };

inline constexpr std::array<EnhanceMethod, 4> kAllMethods{
    EnhanceMethod::None, EnhanceMethod::Gabor, EnhanceMethod::Pix2Pix,
    EnhanceMethod::GaborThenPix2Pix};
inline constexpr std::array<Level, 4> kAllLevels{Level::Clean, Level::Easy, Level::Medium, Level::Hard};
inline constexpr std::array<AlterationKind, 3> kAlterations{
    AlterationKind::Obliteration, AlterationKind::CentralRotation, AlterationKind::ZCut};

std::string_view to_string(EnhanceMethod m) noexcept;
/// Accepts none, gabor, pix2pix, gabor_then_pix2pix. Throws ParseError.
EnhanceMethod parse_method(std::string_view s);

struct EnhancerSpec {
  EnhanceMethod method = EnhanceMethod::None;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<GaborParams> gabor;

  /// Pix2pix variants need a checkpoint; none/gabor must not carry one.
  /// Throws MissingCheckpoint or SchemaViolation.
  void validate() const;
};

/// A ready-to-run enhancer with its generator (if any) loaded.
class Enhancer {
 public:
  /// Loads the checkpoint named by the spec.
  explicit Enhancer(const EnhancerSpec& spec);
  /// Uses an in-memory generator; it may be null for none/gabor.
  Enhancer(EnhanceMethod method, std::shared_ptr<GeneratorNet> generator,
           GaborSettings gabor = {});

  EnhanceMethod method() const noexcept { return method_; }

  /// Output has the input's dimensions. Method none returns the input as is;
  /// every other method returns a Unit-range image.
  FingerprintImage operator()(const FingerprintImage& img);

 private:
  EnhanceMethod method_;
  std::shared_ptr<GeneratorNet> generator_;
  GaborSettings gabor_;
};

FingerprintImage figo_enhance(const EnhancerSpec& spec, const FingerprintImage& img);

// ---- data ------------------------------------------------------------------

struct Sample {
  SampleRecord record;
  FingerprintImage image;
};

/// Clean impressions per subject (impression 0 is the gallery capture) plus,
/// for dataset trees, the altered files that come with them.
struct FingerprintSet {
  std::vector<Sample> clean;
  std::vector<Sample> altered;
  bool synthetic = true;

  std::set<int> subjects() const;
};

/// `impressions` jittered captures of one seeded synthetic finger, RawU8.
std::vector<FingerprintImage> synth_subject(std::uint64_t data_seed, int subject_id, int impressions,
                                            int resolution);

FingerprintSet build_synthetic_set(const SyntheticData& data, int resolution, std::uint64_t seed);

/// Reads a SOCOFing-style tree, resizing to `resolution`. Each real image is
/// impression 0; further impressions are jittered copies of it.
FingerprintSet load_dataset_tree(const std::filesystem::path& root, int resolution, int impressions,
                                 std::uint64_t seed);

struct Probe {
  SampleRecord record;
  std::string expected;
  FingerprintImage image;
};

/// Probes of the given subjects at one level: impressions 1.. as captured for
/// clean, and their degraded copies (all three kinds) for the other levels.
std::vector<Probe> make_probes(const FingerprintSet& set, const std::set<int>& subjects, Level level,
                               const LevelTable& table, std::uint64_t eval_seed);

/// (degraded, clean) pairs from every clean impression of the subjects.
std::vector<ImagePair> make_enhancer_pairs(const FingerprintSet& set, const std::set<int>& subjects,
                                           const LevelTable& table, std::uint64_t seed);

/// Clean impressions grouped by identity key, in key order.
std::vector<IdentityImages> group_identities(const FingerprintSet& set, const std::set<int>& subjects);

/// Impression 0 of each subject's identities.
Gallery build_gallery(IdentityModel& model, const FingerprintSet& set, const std::set<int>& subjects);

/// Synthetic set, or the dataset tree when config.paths.data_root is set.
FingerprintSet load_fingerprint_set(const RunConfig& config);
SplitPlan experiment_split(const RunConfig& config, const FingerprintSet& set);
/// Training pairs for each model, drawn from the training subjects only.
std::vector<ImagePair> enhancer_training_pairs(const RunConfig& config, const FingerprintSet& set,
                                               const SplitPlan& split);
std::vector<LabeledPair> identity_training_pairs(const RunConfig& config, const FingerprintSet& set,
                                                 const SplitPlan& split);

// ---- evaluation -------------------------------------------------------------

struct CellResult {
  Level level = Level::Clean;
  EnhanceMethod method = EnhanceMethod::None;
  int correct = 0;
  int total = 0;
  bool missing = false;
  std::string note;

  double accuracy() const noexcept {
    return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
};

/// Rank-1 accuracy of the probes after enhancement. Throws EmptyProbeSet.
CellResult evaluate(IdentityModel& model, const Gallery& gallery, std::span<const Probe> probes,
                    Enhancer& enhancer);

struct SuiteResult {
  RunConfig config;
  SplitPlan split;
  std::set<int> eval_subjects;
  std::vector<CellResult> cells;
  std::optional<IdentityModel> identity;
  std::shared_ptr<Pix2PixModel> enhancer_model;
  Gallery gallery;
  TrainReport oneshot_report;
  std::vector<EpochMetrics> pix2pix_history;

  const CellResult& cell(Level level, EnhanceMethod method) const;
};

using LogFn = std::function<void(const std::string&)>;

/// Trains (or loads) both models, then fills the 4x4 level/method grid.
/// Evaluation subjects are the test and verify splits together.
SuiteResult run_experiment_suite(const RunConfig& config, const LogFn& log = {});

/// results.csv: '#' provenance header (resolved config and seeds) followed by
/// level,method,correct,total,accuracy,seed rows. Missing cells say "missing".
std::string render_results_csv(const SuiteResult& result);
nlohmann::json summary_json(const SuiteResult& result);
/// Writes results.csv and summary.json into `dir`.
void write_suite_outputs(const SuiteResult& result, const std::filesystem::path& dir);

/// Parsed results.csv row.
struct ResultRow {
  Level level;
  EnhanceMethod method;
  std::optional<int> correct;
  std::optional<int> total;
  std::optional<double> accuracy;
};
std::vector<ResultRow> read_results_csv(const std::filesystem::path& csv);

/// One grouped bar chart per experiment family (fig4, fig5, fig6); returns the
/// written paths.
std::vector<std::filesystem::path> write_report_svgs(std::span<const ResultRow> rows,
                                                     const std::filesystem::path& dir);

}  // namespace figo
