#include "figo/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "figo/degrade.hpp"
#include "figo/error.hpp"
#include "figo/rng.hpp"
#include "figo/synth.hpp"

namespace figo {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t level_tag(Level l) { return static_cast<std::uint64_t>(l); }
std::uint64_t kind_tag(AlterationKind k) { return static_cast<std::uint64_t>(k); }

std::uint64_t alteration_seed(std::uint64_t root, int subject, int impression, AlterationKind kind,
                              Level level) {
  std::uint64_t s = derive_seed(root, static_cast<std::uint64_t>(subject));
  s = derive_seed(s, static_cast<std::uint64_t>(impression));
  return derive_seed(s, kind_tag(kind) * 8 + level_tag(level));
}

SampleRecord synthetic_record(int subject, int impression) {
  SampleRecord r;
  r.subject_id = subject;
  r.hand = Hand::Left;
  r.finger = Finger::Index;
  r.impression = impression;
  return r;
}

FingerprintImage jitter_copy(const FingerprintImage& img, const ImpressionJitter& j) {
  // Rigid shift/rotation about the centre plus contrast and noise, in unit range.
  const FingerprintImage u = normalize(img, RangeTag::Unit);
  const int w = u.width(), h = u.height();
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  const double c = std::cos(j.rotation), s = std::sin(j.rotation);
  Rng rng(j.noise_seed);
  FingerprintImage out(w, h, RangeTag::Unit);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x - cx - j.dx, py = y - cy - j.dy;
      const double sx = cx + c * px + s * py, sy = cy - s * px + c * py;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      auto px_at = [&](int xx, int yy) {
        return u.at(std::clamp(xx, 0, w - 1), std::clamp(yy, 0, h - 1));
      };
      const double top = px_at(x0, y0) + fx * (px_at(x0 + 1, y0) - px_at(x0, y0));
      const double bot = px_at(x0, y0 + 1) + fx * (px_at(x0 + 1, y0 + 1) - px_at(x0, y0 + 1));
      const double v = top + fy * (bot - top);
      out.at(x, y) = 0.5 + j.contrast * (v - 0.5) + j.noise_sigma * rng.normal();
    }
  }
  out.clamp_to_range();
  return quantize_u8(normalize(out, RangeTag::RawU8));
}

FingerprintImage fit(const FingerprintImage& img, int resolution) {
  if (img.width() == resolution && img.height() == resolution) return img;
  return resize(img, resolution, resolution);
}

std::string format_accuracy(const CellResult& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", c.accuracy());
  return buf;
}

}  // namespace

std::string_view to_string(EnhanceMethod m) noexcept {
  switch (m) {
    case EnhanceMethod::None: return "none";
    case EnhanceMethod::Gabor: return "gabor";
    case EnhanceMethod::Pix2Pix: return "pix2pix";
    case EnhanceMethod::GaborThenPix2Pix: return "gabor_then_pix2pix";
  }
  return "none";
}

EnhanceMethod parse_method(std::string_view s) {
  for (EnhanceMethod m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::ParseError, "unknown enhancement method '" + std::string(s) + "'");
}

// ---- enhancer ---------------------------------------------------------------

void EnhancerSpec::validate() const {
  const bool needs = method == EnhanceMethod::Pix2Pix || method == EnhanceMethod::GaborThenPix2Pix;
  if (needs && !checkpoint) {
    throw Error(ErrorCode::MissingCheckpoint,
                std::string(to_string(method)) + " needs a generator checkpoint");
  }
  if (!needs && checkpoint) {
    throw Error(ErrorCode::SchemaViolation,
                std::string(to_string(method)) + " does not take a checkpoint");
  }
  if (gabor) gabor->validate();
}

Enhancer::Enhancer(const EnhancerSpec& spec) : method_(spec.method) {
  spec.validate();
  if (spec.gabor) gabor_.params = *spec.gabor;
  if (spec.checkpoint) {
    Pix2PixModel m = load_checkpoint(*spec.checkpoint);
    generator_ = std::make_shared<GeneratorNet>(std::move(m.generator));
  }
}

Enhancer::Enhancer(EnhanceMethod method, std::shared_ptr<GeneratorNet> generator, GaborSettings gabor)
    : method_(method), generator_(std::move(generator)), gabor_(gabor) {
  const bool needs = method == EnhanceMethod::Pix2Pix || method == EnhanceMethod::GaborThenPix2Pix;
  if (needs && !generator_) {
    throw Error(ErrorCode::MissingCheckpoint, std::string(to_string(method)) + " needs a generator");
  }
}

FingerprintImage Enhancer::operator()(const FingerprintImage& img) {
  auto gabor = [&](const FingerprintImage& in) {
    return gabor_pipeline(normalize(in, RangeTag::Unit), gabor_);
  };
  auto translate = [&](const FingerprintImage& in) {
    const int r = generator_->resolution();
    const FingerprintImage out = enhance(*generator_, fit(normalize(in, RangeTag::Unit), r));
    if (out.width() == in.width() && out.height() == in.height()) return out;
    return resize(out, in.width(), in.height());
  };
  switch (method_) {
    case EnhanceMethod::None: return img;
    case EnhanceMethod::Gabor: return gabor(img);
    case EnhanceMethod::Pix2Pix: return translate(img);
    case EnhanceMethod::GaborThenPix2Pix: return translate(gabor(img));
  }
  return img;
}

FingerprintImage figo_enhance(const EnhancerSpec& spec, const FingerprintImage& img) {
  Enhancer e(spec);
  return e(img);
}

// ---- data -------------------------------------------------------------------

std::set<int> FingerprintSet::subjects() const {
  std::set<int> out;
  for (const Sample& s : clean) out.insert(s.record.subject_id);
  return out;
}

std::vector<FingerprintImage> synth_subject(std::uint64_t data_seed, int subject_id, int impressions,
                                            int resolution) {
  const std::uint64_t subject_seed = derive_seed(data_seed, 0x5355424AULL + static_cast<std::uint64_t>(subject_id));
  const RidgePattern pattern = pattern_from_seed(subject_seed);
  std::vector<FingerprintImage> out;
  for (int i = 0; i < impressions; ++i) {
    const ImpressionJitter j = jitter_from_seed(derive_seed(subject_seed, static_cast<std::uint64_t>(i) + 1));
    out.push_back(render_pattern(pattern, resolution, resolution, j).image);
  }
  return out;
}

FingerprintSet build_synthetic_set(const SyntheticData& data, int resolution, std::uint64_t seed) {
  FingerprintSet set;
  set.synthetic = true;
  for (int s = 0; s < data.subjects; ++s) {
    auto images = synth_subject(seed, s, data.impressions, resolution);
    for (int i = 0; i < data.impressions; ++i) {
      set.clean.push_back({synthetic_record(s, i), std::move(images[static_cast<std::size_t>(i)])});
    }
  }
  return set;
}

FingerprintSet load_dataset_tree(const std::filesystem::path& root, int resolution, int impressions,
                                 std::uint64_t seed) {
  const Catalog catalog = build_catalog(root);
  FingerprintSet set;
  set.synthetic = false;
  for (const SampleRecord& rec : catalog.records) {
    FingerprintImage img = fit(load_image(rec.path), resolution);
    if (!rec.is_real()) {
      set.altered.push_back({rec, std::move(img)});
      continue;
    }
    const std::uint64_t id_seed = derive_seed(seed, fnv1a(rec.identity_key()));
    for (int i = 1; i < impressions; ++i) {
      SampleRecord r = rec;
      r.impression = i;
      const ImpressionJitter j = jitter_from_seed(derive_seed(id_seed, static_cast<std::uint64_t>(i)));
      set.clean.push_back({r, jitter_copy(img, j)});
    }
    set.clean.push_back({rec, std::move(img)});
  }
  std::sort(set.clean.begin(), set.clean.end(),
            [](const Sample& a, const Sample& b) { return record_less(a.record, b.record); });
  return set;
}

std::vector<Probe> make_probes(const FingerprintSet& set, const std::set<int>& subjects, Level level,
                               const LevelTable& table, std::uint64_t eval_seed) {
  std::vector<Probe> probes;
  if (level != Level::Clean && !set.synthetic) {
    for (const Sample& s : set.altered) {
      if (s.record.alteration.level == level && subjects.contains(s.record.subject_id)) {
        probes.push_back({s.record, s.record.identity_key(), s.image});
      }
    }
    return probes;
  }
  for (const Sample& s : set.clean) {
    if (s.record.impression == 0 || !subjects.contains(s.record.subject_id)) continue;
    if (level == Level::Clean) {
      probes.push_back({s.record, s.record.identity_key(), s.image});
      continue;
    }
    for (AlterationKind kind : kAlterations) {
      DegradeParams p;
      p.kind = kind;
      p.level = level;
      p.level_table = table;
      p.seed = alteration_seed(eval_seed, s.record.subject_id, s.record.impression, kind, level);
      SampleRecord r = s.record;
      r.alteration = {kind, level};
      probes.push_back({r, s.record.identity_key(), degrade(s.image, p)});
    }
  }
  return probes;
}

std::vector<ImagePair> make_enhancer_pairs(const FingerprintSet& set, const std::set<int>& subjects,
                                           const LevelTable& table, std::uint64_t seed) {
  std::vector<ImagePair> pairs;
  if (!set.synthetic) {
    std::map<std::string, const FingerprintImage*> reals;
    for (const Sample& s : set.clean) {
      if (s.record.impression == 0) reals[s.record.identity_key()] = &s.image;
    }
    for (const Sample& s : set.altered) {
      if (!subjects.contains(s.record.subject_id)) continue;
      const auto it = reals.find(s.record.identity_key());
      if (it != reals.end()) pairs.push_back({s.image, *it->second});
    }
    return pairs;
  }
  for (const Sample& s : set.clean) {
    if (!subjects.contains(s.record.subject_id)) continue;
    for (Level level : {Level::Easy, Level::Medium, Level::Hard}) {
      for (AlterationKind kind : kAlterations) {
        DegradeParams p;
        p.kind = kind;
        p.level = level;
        p.level_table = table;
        p.seed = alteration_seed(seed, s.record.subject_id, s.record.impression, kind, level);
        pairs.push_back({degrade(s.image, p), s.image});
      }
    }
  }
  return pairs;
}

std::vector<IdentityImages> group_identities(const FingerprintSet& set, const std::set<int>& subjects) {
  std::map<std::string, std::vector<const Sample*>> by_key;
  for (const Sample& s : set.clean) {
    if (subjects.contains(s.record.subject_id)) by_key[s.record.identity_key()].push_back(&s);
  }
  std::vector<IdentityImages> out;
  for (auto& [key, samples] : by_key) {
    std::sort(samples.begin(), samples.end(), [](const Sample* a, const Sample* b) {
      return a->record.impression < b->record.impression;
    });
    IdentityImages id{key, {}};
    for (const Sample* s : samples) id.images.push_back(s->image);
    out.push_back(std::move(id));
  }
  return out;
}

Gallery build_gallery(IdentityModel& model, const FingerprintSet& set, const std::set<int>& subjects) {
  Gallery g(model.checksum(), model.embedding_dim());
  for (const Sample& s : set.clean) {
    if (s.record.impression != 0 || !subjects.contains(s.record.subject_id)) continue;
    g.add(s.record.identity_key(), embed(model, fit(s.image, model.resolution())));
  }
  return g;
}

// ---- evaluation -------------------------------------------------------------

CellResult evaluate(IdentityModel& model, const Gallery& gallery, std::span<const Probe> probes,
                    Enhancer& enhancer) {
  if (probes.empty()) throw Error(ErrorCode::EmptyProbeSet, "no probes to evaluate");
  CellResult cell;
  cell.method = enhancer.method();
  cell.level = probes.front().record.alteration.level;
  for (const Probe& p : probes) {
    const FingerprintImage enhanced = fit(enhancer(p.image), model.resolution());
    const Identification id = identify(model, enhanced, gallery);
    cell.correct += id.best == p.expected ? 1 : 0;
    cell.total += 1;
  }
  return cell;
}

const CellResult& SuiteResult::cell(Level level, EnhanceMethod method) const {
  for (const CellResult& c : cells) {
    if (c.level == level && c.method == method) return c;
  }
  throw Error(ErrorCode::SchemaViolation, "no cell " + std::string(to_string(level)) + "/" +
                                              std::string(to_string(method)));
}

FingerprintSet load_fingerprint_set(const RunConfig& cfg) {
  return cfg.paths.data_root
             ? load_dataset_tree(*cfg.paths.data_root, cfg.resolution, cfg.synthetic.impressions,
                                 cfg.seeds.data)
             : build_synthetic_set(cfg.synthetic, cfg.resolution, cfg.seeds.data);
}

SplitPlan experiment_split(const RunConfig& cfg, const FingerprintSet& set) {
  return make_split(set.subjects(), cfg.split, cfg.seeds.data);
}

std::vector<ImagePair> enhancer_training_pairs(const RunConfig& cfg, const FingerprintSet& set,
                                               const SplitPlan& split) {
  return make_enhancer_pairs(set, split.train, cfg.level_table, derive_seed(cfg.seeds.data, 0x503250ULL));
}

std::vector<LabeledPair> identity_training_pairs(const RunConfig& cfg, const FingerprintSet& set,
                                                 const SplitPlan& split) {
  return make_pairs(group_identities(set, split.train), cfg.oneshot.negatives_per_positive,
                    cfg.seeds.oneshot);
}

SuiteResult run_experiment_suite(const RunConfig& input, const LogFn& log) {
  auto note = [&](const std::string& msg) {
    if (log) log(msg);
  };
  SuiteResult result;
  result.config = input;
  result.config.sync_seeds();
  result.config.validate();
  const RunConfig& cfg = result.config;

  const FingerprintSet set = load_fingerprint_set(cfg);
  result.split = experiment_split(cfg, set);
  result.eval_subjects = result.split.test;
  result.eval_subjects.insert(result.split.verify.begin(), result.split.verify.end());
  note("dataset: " + std::to_string(set.clean.size()) + " clean samples, " +
       std::to_string(result.split.train.size()) + " training subjects, " +
       std::to_string(result.eval_subjects.size()) + " evaluation subjects");

  if (cfg.paths.oneshot_checkpoint) {
    result.identity.emplace(load_identity_checkpoint(*cfg.paths.oneshot_checkpoint));
    note("identity model loaded from " + cfg.paths.oneshot_checkpoint->string());
  } else {
    const auto pairs = identity_training_pairs(cfg, set, result.split);
    note("training identity model on " + std::to_string(pairs.size()) + " pairs");
    result.identity.emplace(build_identity_model(cfg.resolution, cfg.oneshot));
    result.oneshot_report = train_oneshot(*result.identity, pairs);
  }
  IdentityModel& identity = *result.identity;

  std::shared_ptr<GeneratorNet> generator;
  std::string enhancer_error;
  try {
    if (cfg.paths.pix2pix_checkpoint) {
      result.enhancer_model = std::make_shared<Pix2PixModel>(load_checkpoint(*cfg.paths.pix2pix_checkpoint));
      note("enhancer loaded from " + cfg.paths.pix2pix_checkpoint->string());
    } else {
      const auto pairs = enhancer_training_pairs(cfg, set, result.split);
      note("training enhancer on " + std::to_string(pairs.size()) + " pairs");
      result.enhancer_model = std::make_shared<Pix2PixModel>(build_models(cfg.resolution, cfg.pix2pix));
      result.pix2pix_history = train_pix2pix(*result.enhancer_model, pairs, [&](const EpochMetrics& m) {
        note("enhancer epoch " + std::to_string(m.epoch) + " d=" + std::to_string(m.mean.d_loss) +
             " g_adv=" + std::to_string(m.mean.g_adv_loss) + " g_l1=" + std::to_string(m.mean.g_l1_loss));
      });
    }
    generator = std::shared_ptr<GeneratorNet>(result.enhancer_model, &result.enhancer_model->generator);
  } catch (const Error& e) {
    enhancer_error = std::string(to_string(e.code())) + ": " + e.what();
    note("enhancer unavailable, pix2pix cells will be missing: " + enhancer_error);
  }

  result.gallery = build_gallery(identity, set, result.eval_subjects);
  for (Level level : kAllLevels) {
    const auto probes = make_probes(set, result.eval_subjects, level, cfg.level_table, cfg.seeds.eval);
    for (EnhanceMethod method : kAllMethods) {
      const bool needs_gen = method == EnhanceMethod::Pix2Pix || method == EnhanceMethod::GaborThenPix2Pix;
      CellResult cell;
      cell.level = level;
      cell.method = method;
      if (needs_gen && !generator) {
        cell.missing = true;
        cell.note = enhancer_error;
      } else {
        try {
          Enhancer enhancer(method, needs_gen ? generator : nullptr);
          cell = evaluate(identity, result.gallery, probes, enhancer);
          cell.level = level;
        } catch (const Error& e) {
          cell.missing = true;
          cell.note = std::string(to_string(e.code())) + ": " + e.what();
        }
      }
      note(std::string(to_string(level)) + "/" + std::string(to_string(method)) + ": " +
           (cell.missing ? "missing" : std::to_string(cell.correct) + "/" + std::to_string(cell.total)));
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

// ---- outputs ----------------------------------------------------------------

std::string render_results_csv(const SuiteResult& r) {
  const RunConfig& c = r.config;
  std::ostringstream out;
  out << "# figo results, version " << FIGO_VERSION << '\n';
  out << "# config: " << to_json(c).dump() << '\n';
  out << "# seeds: data=" << c.seeds.data << " pix2pix=" << c.seeds.pix2pix
      << " oneshot=" << c.seeds.oneshot << " eval=" << c.seeds.eval << '\n';
  out << "level,method,correct,total,accuracy,seed\n";
  for (const CellResult& cell : r.cells) {
    out << to_string(cell.level) << ',' << to_string(cell.method) << ',';
    if (cell.missing) {
      out << "missing,missing,missing";
    } else {
      out << cell.correct << ',' << cell.total << ',' << format_accuracy(cell);
    }
    out << ',' << c.seeds.eval << '\n';
  }
  return out.str();
}

nlohmann::json summary_json(const SuiteResult& r) {
  using json = nlohmann::json;
  json cells = json::array();
  for (const CellResult& c : r.cells) {
    json j = {{"level", to_string(c.level)}, {"method", to_string(c.method)}, {"missing", c.missing}};
    if (c.missing) {
      j["note"] = c.note;
    } else {
      j["correct"] = c.correct;
      j["total"] = c.total;
      j["accuracy"] = c.accuracy();
    }
    cells.push_back(j);
  }
  auto series = [&](std::initializer_list<EnhanceMethod> methods) {
    json fig = json::object();
    for (EnhanceMethod m : methods) {
      json values = json::array();
      for (Level l : kAllLevels) {
        const CellResult& c = r.cell(l, m);
        values.push_back(c.missing ? json(nullptr) : json(c.accuracy()));
      }
      fig[std::string(to_string(m))] = values;
    }
    return fig;
  };
  json levels = json::array();
  for (Level l : kAllLevels) levels.push_back(to_string(l));
  json p2p_history = json::array();
  for (const EpochMetrics& m : r.pix2pix_history) {
    p2p_history.push_back({{"epoch", m.epoch},
                           {"d_loss", m.mean.d_loss},
                           {"g_adv", m.mean.g_adv_loss},
                           {"g_l1", m.mean.g_l1_loss}});
  }
  json notes = json::array();
  if (r.config.oneshot.embedding_dim != 2) {
    notes.push_back("embedding_dim is " + std::to_string(r.config.oneshot.embedding_dim) +
                    "; the 2-unit embedding reading is available via paper_faithful");
  }
  json split = to_json(r.split);
  return {{"version", FIGO_VERSION},
          {"config", to_json(r.config)},
          {"split", split},
          {"evaluation_subjects", r.eval_subjects},
          {"gallery_size", r.gallery.size()},
          {"identity_checksum", r.identity ? r.identity->checksum() : 0},
          {"enhancer_checksum", r.enhancer_model ? r.enhancer_model->checksum() : 0},
          {"oneshot_epoch_loss", r.oneshot_report.epoch_loss},
          {"pix2pix_epochs", p2p_history},
          {"cells", cells},
          {"figures",
           {{"levels", levels},
            {"fig4", series({EnhanceMethod::None})},
            {"fig5", series({EnhanceMethod::None, EnhanceMethod::Gabor, EnhanceMethod::Pix2Pix})},
            {"fig6", series({EnhanceMethod::Gabor, EnhanceMethod::Pix2Pix, EnhanceMethod::GaborThenPix2Pix})}}},
          {"notes", notes}};
}

void write_suite_outputs(const SuiteResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "results.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "results.csv").string());
    out << render_results_csv(result);
  }
  std::ofstream out(dir / "summary.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "summary.json").string());
  out << summary_json(result).dump(2) << '\n';
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::FileNotFound, "results file not found: " + csv.string());
  std::vector<ResultRow> rows;
  std::string line;
  bool header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with('#')) continue;
    if (!header) {
      if (line != "level,method,correct,total,accuracy,seed") {
        throw Error(ErrorCode::CorruptHeader, csv.string() + ": unexpected column header");
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) {
      throw Error(ErrorCode::ParseError, csv.string() + ":" + std::to_string(line_no) + ": expected 6 fields");
    }
    ResultRow row{parse_level(f[0]), parse_method(f[1]), {}, {}, {}};
    if (f[2] != "missing") {
      try {
        row.correct = std::stoi(f[2]);
        row.total = std::stoi(f[3]);
        row.accuracy = std::stod(f[4]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, csv.string() + ":" + std::to_string(line_no) + ": bad number");
      }
    }
    rows.push_back(row);
  }
  if (!header) throw Error(ErrorCode::CorruptHeader, csv.string() + ": no column header");
  return rows;
}

}  // namespace figo
