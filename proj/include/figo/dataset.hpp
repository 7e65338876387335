#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace figo {

enum class Gender { M, F, Unknown };
enum class Hand { Left, Right };
enum class Finger { Thumb, Index, Middle, Ring, Little };
enum class AlterationKind { None, Obliteration, CentralRotation, ZCut };
enum class Level { Clean, Easy, Medium, Hard };

std::string_view to_string(Gender g) noexcept;
std::string_view to_string(Hand h) noexcept;
std::string_view to_string(Finger f) noexcept;
std::string_view to_string(AlterationKind k) noexcept;
std::string_view to_string(Level l) noexcept;

// Parsers for the lowercase names above; throw ParseError on anything else.
Gender parse_gender(std::string_view s);
Hand parse_hand(std::string_view s);
Finger parse_finger(std::string_view s);
AlterationKind parse_kind(std::string_view s);
Level parse_level(std::string_view s);

struct AlterationTag {
  AlterationKind kind = AlterationKind::None;
  Level level = Level::Clean;

  // Throws ParseError when kind == None and level != Clean or vice versa.
  void validate() const;
  auto operator<=>(const AlterationTag&) const = default;
};

/// What a SOCOFing-style filename encodes. Level is not part of the name; it
/// comes from the directory a file sits in.
struct FilenameMeta {
  int subject_id = 0;
  Gender gender = Gender::Unknown;
  Hand hand = Hand::Left;
  Finger finger = Finger::Thumb;
  AlterationKind kind = AlterationKind::None;
  std::string extension;  // without the dot, case preserved

  bool operator==(const FilenameMeta&) const = default;
};

struct SampleRecord {
  int subject_id = 0;
  Gender gender = Gender::Unknown;
  Hand hand = Hand::Left;
  Finger finger = Finger::Thumb;
  AlterationTag alteration;
  // Capture index for data sources with several impressions of one finger.
  // SOCOFing-style trees always use 0.
  int impression = 0;
  std::filesystem::path path;

  bool is_real() const noexcept { return alteration.kind == AlterationKind::None; }
  /// "<subject>/<hand>/<finger>", the identity key used for galleries.
  std::string identity_key() const;
};

/// Sort key (subject, hand, finger, alteration, impression).
bool record_less(const SampleRecord& a, const SampleRecord& b) noexcept;

/// `<id>__<G>_<Hand>_<finger>_finger[_<Alt>].<ext>`, Alt in {Obl, CR, Zcut}.
FilenameMeta parse_filename(std::string_view name);
std::string render_filename(const FilenameMeta& meta);

struct CatalogIssue {
  std::filesystem::path path;
  std::string reason;
};

struct Catalog {
  std::vector<SampleRecord> records;
  std::vector<CatalogIssue> skipped;

  std::set<int> subjects() const;
};

/// Scans root/Real and root/Altered/{Easy,Medium,Hard} (SOCOFing's
/// "Altered-Easy" spelling is accepted too). Unparseable files land in
/// Catalog::skipped. Throws EmptyCatalog when nothing parses.
Catalog build_catalog(const std::filesystem::path& root);

/// Manifest CSV with header `path,subject_id,gender,hand,finger,kind,level`.
/// Relative paths resolve against the manifest's directory.
Catalog load_manifest(const std::filesystem::path& csv);

struct SplitRatios {
  double train = 0.8;
  double test = 0.1;
  double verify = 0.1;
};

struct SplitPlan {
  std::set<int> train;
  std::set<int> test;
  std::set<int> verify;
  std::uint64_t seed = 0;

  bool operator==(const SplitPlan&) const = default;
};

/// Subject-level split. Test and verify sizes are floor(n * ratio); the
/// remainder goes to train. Throws TooFewSubjects below three subjects.
SplitPlan make_split(const std::set<int>& subjects, SplitRatios ratios, std::uint64_t seed);
SplitPlan make_split(const Catalog& catalog, SplitRatios ratios, std::uint64_t seed);

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_from_json(const nlohmann::json& j);

}  // namespace figo
