#include "figo/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "figo/error.hpp"
#include "figo/rng.hpp"

namespace figo {
namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

[[noreturn]] void parse_fail(std::string_view field, std::string_view token) {
  throw Error(ErrorCode::ParseError,
              "ParseError at " + std::string(field) + ": '" + std::string(token) + "'");
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_positive(std::string_view token, std::string_view field) {
  int value = 0;
  if (token.empty() || !std::all_of(token.begin(), token.end(),
                                    [](unsigned char c) { return std::isdigit(c); })) {
    parse_fail(field, token);
  }
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value <= 0) {
    parse_fail(field, token);
  }
  return value;
}

bool supported_image_ext(std::string_view ext) {
  const std::string e = lower(ext);
  return e == "png" || e == "bmp" || e == "pgm";
}

std::optional<Level> level_from_dir(const std::string& name) {
  const std::string n = lower(name);
  if (n == "easy" || n == "altered-easy") return Level::Easy;
  if (n == "medium" || n == "altered-medium") return Level::Medium;
  if (n == "hard" || n == "altered-hard") return Level::Hard;
  return std::nullopt;
}

auto record_key(const SampleRecord& r) {
  return std::tuple(r.subject_id, r.hand, r.finger, r.alteration, r.impression);
}

}  // namespace

std::string_view to_string(Gender g) noexcept {
  switch (g) {
    case Gender::M: return "M";
    case Gender::F: return "F";
    case Gender::Unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(Hand h) noexcept { return h == Hand::Left ? "Left" : "Right"; }

std::string_view to_string(Finger f) noexcept {
  switch (f) {
    case Finger::Thumb: return "thumb";
    case Finger::Index: return "index";
    case Finger::Middle: return "middle";
    case Finger::Ring: return "ring";
    case Finger::Little: return "little";
  }
  return "thumb";
}

std::string_view to_string(AlterationKind k) noexcept {
  switch (k) {
    case AlterationKind::None: return "none";
    case AlterationKind::Obliteration: return "obliteration";
    case AlterationKind::CentralRotation: return "central_rotation";
    case AlterationKind::ZCut: return "z_cut";
  }
  return "none";
}

std::string_view to_string(Level l) noexcept {
  switch (l) {
    case Level::Clean: return "clean";
    case Level::Easy: return "easy";
    case Level::Medium: return "medium";
    case Level::Hard: return "hard";
  }
  return "clean";
}

Gender parse_gender(std::string_view s) {
  const std::string v = lower(s);
  if (v == "m") return Gender::M;
  if (v == "f") return Gender::F;
  if (v == "unknown" || v == "u") return Gender::Unknown;
  parse_fail("<G>", s);
}

Hand parse_hand(std::string_view s) {
  const std::string v = lower(s);
  if (v == "left") return Hand::Left;
  if (v == "right") return Hand::Right;
  parse_fail("<Hand>", s);
}

Finger parse_finger(std::string_view s) {
  const std::string v = lower(s);
  if (v == "thumb") return Finger::Thumb;
  if (v == "index") return Finger::Index;
  if (v == "middle") return Finger::Middle;
  if (v == "ring") return Finger::Ring;
  if (v == "little") return Finger::Little;
  parse_fail("<finger>", s);
}

AlterationKind parse_kind(std::string_view s) {
  const std::string v = lower(s);
  if (v == "none") return AlterationKind::None;
  if (v == "obliteration" || v == "obl") return AlterationKind::Obliteration;
  if (v == "central_rotation" || v == "cr") return AlterationKind::CentralRotation;
  if (v == "z_cut" || v == "zcut") return AlterationKind::ZCut;
  parse_fail("<kind>", s);
}

Level parse_level(std::string_view s) {
  const std::string v = lower(s);
  if (v == "clean") return Level::Clean;
  if (v == "easy") return Level::Easy;
  if (v == "medium") return Level::Medium;
  if (v == "hard") return Level::Hard;
  parse_fail("<level>", s);
}

void AlterationTag::validate() const {
  if ((kind == AlterationKind::None) != (level == Level::Clean)) {
    throw Error(ErrorCode::ParseError,
                "alteration kind " + std::string(to_string(kind)) + " incompatible with level " +
                    std::string(to_string(level)));
  }
}

std::string SampleRecord::identity_key() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", subject_id);
  return std::string(buf) + "/" + std::string(to_string(hand)) + "/" +
         std::string(to_string(finger));
}

bool record_less(const SampleRecord& a, const SampleRecord& b) noexcept {
  return record_key(a) < record_key(b);
}

FilenameMeta parse_filename(std::string_view name) {
  const std::size_t dot = name.rfind('.');
  if (dot == std::string_view::npos || dot + 1 == name.size()) parse_fail("<ext>", name);
  FilenameMeta meta;
  meta.extension = std::string(name.substr(dot + 1));
  const std::string_view stem = name.substr(0, dot);

  const std::size_t sep = stem.find("__");
  if (sep == std::string_view::npos) parse_fail("<id>", stem);
  meta.subject_id = parse_positive(stem.substr(0, sep), "<id>");

  const auto tokens = split(stem.substr(sep + 2), '_');
  if (tokens.size() < 4 || tokens.size() > 5) parse_fail("<G>_<Hand>_<finger>_finger", stem.substr(sep + 2));
  if (tokens[0] != "M" && tokens[0] != "F") parse_fail("<G>", tokens[0]);
  meta.gender = tokens[0] == "M" ? Gender::M : Gender::F;
  if (tokens[1] != "Left" && tokens[1] != "Right") parse_fail("<Hand>", tokens[1]);
  meta.hand = tokens[1] == "Left" ? Hand::Left : Hand::Right;
  meta.finger = parse_finger(tokens[2]);
  if (tokens[2] != to_string(meta.finger)) parse_fail("<finger>", tokens[2]);
  if (tokens[3] != "finger") parse_fail("finger", tokens[3]);
  if (tokens.size() == 5) {
    if (tokens[4] == "Obl") meta.kind = AlterationKind::Obliteration;
    else if (tokens[4] == "CR") meta.kind = AlterationKind::CentralRotation;
    else if (tokens[4] == "Zcut") meta.kind = AlterationKind::ZCut;
    else parse_fail("<Alt>", tokens[4]);
  }
  return meta;
}

std::string render_filename(const FilenameMeta& meta) {
  std::string name = std::to_string(meta.subject_id) + "__" +
                     std::string(meta.gender == Gender::F ? "F" : "M") + "_" +
                     std::string(to_string(meta.hand)) + "_" +
                     std::string(to_string(meta.finger)) + "_finger";
  switch (meta.kind) {
    case AlterationKind::Obliteration: name += "_Obl"; break;
    case AlterationKind::CentralRotation: name += "_CR"; break;
    case AlterationKind::ZCut: name += "_Zcut"; break;
    case AlterationKind::None: break;
  }
  return name + "." + meta.extension;
}

std::set<int> Catalog::subjects() const {
  std::set<int> ids;
  for (const auto& r : records) ids.insert(r.subject_id);
  return ids;
}

namespace {

void scan_dir(const fs::path& dir, Level level, Catalog& catalog) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    try {
      const FilenameMeta meta = parse_filename(file.filename().string());
      if (!supported_image_ext(meta.extension)) {
        catalog.skipped.push_back({file, "unsupported extension ." + meta.extension});
        continue;
      }
      if ((meta.kind == AlterationKind::None) != (level == Level::Clean)) {
        catalog.skipped.push_back({file, "alteration token does not match directory"});
        continue;
      }
      SampleRecord rec;
      rec.subject_id = meta.subject_id;
      rec.gender = meta.gender;
      rec.hand = meta.hand;
      rec.finger = meta.finger;
      rec.alteration = {meta.kind, level};
      rec.path = file;
      catalog.records.push_back(std::move(rec));
    } catch (const Error& e) {
      catalog.skipped.push_back({file, e.what()});
    }
  }
}

void finish_catalog(Catalog& catalog, const std::string& origin) {
  std::stable_sort(catalog.records.begin(), catalog.records.end(), record_less);
  std::vector<SampleRecord> unique;
  unique.reserve(catalog.records.size());
  for (auto& r : catalog.records) {
    if (!unique.empty() && record_key(unique.back()) == record_key(r)) {
      catalog.skipped.push_back({r.path, "duplicate (subject, hand, finger, alteration)"});
      continue;
    }
    unique.push_back(std::move(r));
  }
  catalog.records = std::move(unique);
  if (catalog.records.empty()) {
    throw Error(ErrorCode::EmptyCatalog, "no parseable samples under " + origin);
  }
}

}  // namespace

Catalog build_catalog(const fs::path& root) {
  Catalog catalog;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::FileNotFound, "dataset root is not a directory: " + root.string());
  }
  const fs::path real = root / "Real";
  if (fs::is_directory(real, ec)) scan_dir(real, Level::Clean, catalog);
  const fs::path altered = root / "Altered";
  if (fs::is_directory(altered, ec)) {
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(altered)) {
      if (entry.is_directory()) subdirs.push_back(entry.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) {
      if (auto level = level_from_dir(sub.filename().string())) scan_dir(sub, *level, catalog);
    }
  }
  finish_catalog(catalog, root.string());
  return catalog;
}

Catalog load_manifest(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open manifest " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyCatalog, "manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "path,subject_id,gender,hand,finger,kind,level") {
    throw Error(ErrorCode::ParseError, "manifest header must be "
                                       "'path,subject_id,gender,hand,finger,kind,level'");
  }
  Catalog catalog;
  const fs::path base = csv.parent_path();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const fs::path where = csv.string() + ":" + std::to_string(line_no);
    if (cells.size() != 7) {
      catalog.skipped.push_back({where, "expected 7 columns"});
      continue;
    }
    try {
      SampleRecord rec;
      fs::path p{std::string(cells[0])};
      rec.path = p.is_absolute() ? p : base / p;
      rec.subject_id = parse_positive(cells[1], "<subject_id>");
      rec.gender = parse_gender(cells[2]);
      rec.hand = parse_hand(cells[3]);
      rec.finger = parse_finger(cells[4]);
      rec.alteration = {parse_kind(cells[5]), parse_level(cells[6])};
      rec.alteration.validate();
      catalog.records.push_back(std::move(rec));
    } catch (const Error& e) {
      catalog.skipped.push_back({where, e.what()});
    }
  }
  finish_catalog(catalog, csv.string());
  return catalog;
}

SplitPlan make_split(const std::set<int>& subjects, SplitRatios ratios, std::uint64_t seed) {
  const std::size_t n = subjects.size();
  if (n < 3) {
    throw Error(ErrorCode::TooFewSubjects,
                "a train/test/verify split needs at least 3 subjects, got " + std::to_string(n));
  }
  if (!(ratios.train >= 0 && ratios.test > 0 && ratios.verify > 0)) {
    throw Error(ErrorCode::SchemaViolation, "split ratios must be positive");
  }
  const double total = ratios.train + ratios.test + ratios.verify;
  // Small epsilon so that e.g. 600 * 0.1 does not floor to 59.
  auto portion = [&](double r) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(n * (r / total) + 1e-9));
  };
  const std::size_t n_test = portion(ratios.test);
  const std::size_t n_verify = portion(ratios.verify);
  if (n_test + n_verify >= n) {
    throw Error(ErrorCode::TooFewSubjects, "split leaves no training subjects");
  }

  std::vector<int> order(subjects.begin(), subjects.end());
  Rng rng(derive_seed(seed, 0x53504C4954ULL));
  rng.shuffle(std::span<int>(order));

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_test) plan.test.insert(order[i]);
    else if (i < n_test + n_verify) plan.verify.insert(order[i]);
    else plan.train.insert(order[i]);
  }
  return plan;
}

SplitPlan make_split(const Catalog& catalog, SplitRatios ratios, std::uint64_t seed) {
  return make_split(catalog.subjects(), ratios, seed);
}

nlohmann::json to_json(const SplitPlan& plan) {
  return nlohmann::json{{"seed", plan.seed},
                        {"train", std::vector<int>(plan.train.begin(), plan.train.end())},
                        {"test", std::vector<int>(plan.test.begin(), plan.test.end())},
                        {"verify", std::vector<int>(plan.verify.begin(), plan.verify.end())}};
}

SplitPlan split_from_json(const nlohmann::json& j) {
  try {
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (int id : j.at("train").get<std::vector<int>>()) plan.train.insert(id);
    for (int id : j.at("test").get<std::vector<int>>()) plan.test.insert(id);
    for (int id : j.at("verify").get<std::vector<int>>()) plan.verify.insert(id);
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed split plan: ") + e.what());
  }
}

}  // namespace figo
