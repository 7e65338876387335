#include <doctest.h>

#include <algorithm>
#include <memory>

#include "figo/error.hpp"
#include "figo/pipeline.hpp"
#include "support.hpp"

using namespace figo;

namespace {

// Small enough to run in seconds: 10 subjects, 2 evaluation subjects.
RunConfig tiny_config() {
  return run_config_from_json({{"synthetic", {{"subjects", 10}, {"impressions", 2}}},
                               {"pix2pix", {{"epochs", 1}, {"generator_channels", 4}, {"discriminator_channels", 4}}},
                               {"oneshot", {{"epochs", 2}, {"embedding_dim", 8}, {"encoder_channels", {4, 4, 8, 8}}}}});
}

std::shared_ptr<GeneratorNet> small_generator() {
  Pix2PixTrainConfig cfg;
  cfg.generator_channels = 4;
  cfg.discriminator_channels = 4;
  cfg.seed = 3;
  auto model = std::make_shared<Pix2PixModel>(build_models(64, cfg));
  return std::shared_ptr<GeneratorNet>(model, &model->generator);
}

}  // namespace

TEST_CASE("method names") {
  for (EnhanceMethod m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("sharpen"), Error);
}

TEST_CASE("enhancer variants") {
  const auto raw = synth_fingerprint(5, 64, 64).image;
  const auto generator = small_generator();

  Enhancer none(EnhanceMethod::None, nullptr);
  CHECK(none(raw) == raw);

  Enhancer gabor(EnhanceMethod::Gabor, nullptr);
  const auto g = gabor(raw);
  CHECK(g.range() == RangeTag::Unit);
  CHECK(g == gabor_pipeline(normalize(raw, RangeTag::Unit), GaborSettings{}));

  Enhancer pix(EnhanceMethod::Pix2Pix, generator);
  Enhancer chained(EnhanceMethod::GaborThenPix2Pix, generator);
  CHECK(chained(raw) == pix(g));
  CHECK(pix(raw).width() == 64);

  // Other sizes are resized through the generator and back.
  const auto wide = synth_fingerprint(6, 80, 72).image;
  const auto out = pix(wide);
  CHECK(out.width() == 80);
  CHECK(out.height() == 72);

  CHECK_THROWS_AS(Enhancer(EnhanceMethod::Pix2Pix, nullptr), Error);
}

TEST_CASE("gabor leaves a flat image alone") {
  const FingerprintImage flat(64, 64, RangeTag::Unit, 0.5);
  Enhancer gabor(EnhanceMethod::Gabor, nullptr);
  CHECK(gabor(flat) == flat);
}

TEST_CASE("enhancer spec validation") {
  EnhancerSpec s;
  CHECK_NOTHROW(s.validate());
  s.method = EnhanceMethod::Pix2Pix;
  try {
    s.validate();
    FAIL("expected MissingCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingCheckpoint);
  }
  s.method = EnhanceMethod::Gabor;
  s.checkpoint = "g.bin";
  CHECK_THROWS_AS(s.validate(), Error);
  s.method = EnhanceMethod::GaborThenPix2Pix;
  CHECK_NOTHROW(s.validate());
  CHECK_THROWS_AS(figo_enhance(s, FingerprintImage(64, 64, RangeTag::Unit)), Error);  // file absent
}

TEST_CASE("probe and pair construction") {
  const RunConfig cfg = tiny_config();
  const FingerprintSet set = load_fingerprint_set(cfg);
  CHECK(set.clean.size() == 20);
  CHECK(set.subjects().size() == 10);
  const SplitPlan split = experiment_split(cfg, set);
  CHECK(split.train.size() == 8);

  const std::set<int> eval{*split.test.begin()};
  const auto clean = make_probes(set, eval, Level::Clean, cfg.level_table, 4);
  REQUIRE(clean.size() == 1);
  CHECK(clean[0].record.impression == 1);
  const auto hard = make_probes(set, eval, Level::Hard, cfg.level_table, 4);
  CHECK(hard.size() == 3);
  for (const auto& p : hard) {
    CHECK(p.expected == clean[0].expected);
    CHECK(p.record.alteration.level == Level::Hard);
  }
  const auto again = make_probes(set, eval, Level::Hard, cfg.level_table, 4);
  for (std::size_t i = 0; i < hard.size(); ++i) CHECK(again[i].image == hard[i].image);

  const auto pairs = enhancer_training_pairs(cfg, set, split);
  CHECK(pairs.size() == 8 * 2 * 9);
  const auto ids = group_identities(set, split.train);
  CHECK(ids.size() == 8);
  CHECK(std::is_sorted(ids.begin(), ids.end(), [](const auto& a, const auto& b) { return a.key < b.key; }));
  const auto labeled = identity_training_pairs(cfg, set, split);
  CHECK(std::count_if(labeled.begin(), labeled.end(), [](const LabeledPair& p) { return p.label == 1; }) == 8);
}

TEST_CASE("an enrolled image is found exactly") {
  const RunConfig cfg = tiny_config();
  const FingerprintSet set = load_fingerprint_set(cfg);
  IdentityModel model = build_identity_model(64, cfg.oneshot);
  const std::set<int> subjects = set.subjects();
  const Gallery g = build_gallery(model, set, subjects);
  CHECK(g.size() == 10);
  for (const Sample& s : set.clean) {
    if (s.record.impression != 0) continue;
    const auto id = identify(model, s.image, g);
    CHECK(id.best == s.record.identity_key());
    CHECK(id.score == similarity(model, s.image, s.image));
  }
  Enhancer none(EnhanceMethod::None, nullptr);
  CHECK_THROWS_AS(evaluate(model, g, std::span<const Probe>{}, none), Error);
}

TEST_CASE("tiny experiment grid") {
  const SuiteResult r = run_experiment_suite(tiny_config());
  CHECK(r.cells.size() == 16);
  CHECK(r.eval_subjects.size() == 2);
  CHECK(r.gallery.size() == 2);
  for (Level l : kAllLevels) {
    for (EnhanceMethod m : kAllMethods) {
      const CellResult& c = r.cell(l, m);
      CHECK_FALSE(c.missing);
      CHECK(c.total == (l == Level::Clean ? 2 : 6));
      CHECK(c.correct <= c.total);
    }
  }

  figo::test::TempDir dir("suite");
  write_suite_outputs(r, dir.path());
  const auto rows = read_results_csv(dir / "results.csv");
  REQUIRE(rows.size() == 16);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].correct == r.cells[i].correct);
    CHECK(*rows[i].accuracy == doctest::Approx(r.cells[i].accuracy()).epsilon(1e-6));
  }
  const auto summary = nlohmann::json::parse(figo::test::read_file(dir / "summary.json"));
  CHECK(summary["cells"].size() == 16);
  CHECK(summary["figures"]["fig6"].contains("gabor_then_pix2pix"));

  const auto svgs = write_report_svgs(rows, dir / "figs");
  REQUIRE(svgs.size() == 3);
  for (const auto& p : svgs) CHECK(figo::test::read_file(p).starts_with("<svg"));
  CHECK(to_json(config_from_results(dir / "results.csv")) == to_json(r.config));
}

TEST_CASE("missing enhancer leaves pix2pix cells missing") {
  RunConfig cfg = tiny_config();
  figo::test::TempDir dir("missing");
  cfg.paths.pix2pix_checkpoint = dir / "absent.bin";
  const SuiteResult r = run_experiment_suite(cfg);
  CHECK_FALSE(r.cell(Level::Hard, EnhanceMethod::Gabor).missing);
  CHECK(r.cell(Level::Hard, EnhanceMethod::Pix2Pix).missing);
  CHECK(r.cell(Level::Clean, EnhanceMethod::GaborThenPix2Pix).missing);
  const std::string csv = render_results_csv(r);
  CHECK(csv.find("hard,pix2pix,missing,missing,missing") != std::string::npos);
  figo::test::write_file(dir / "results.csv", csv);
  const auto rows = read_results_csv(dir / "results.csv");
  CHECK_FALSE(rows[2].correct.has_value());
}

TEST_CASE("results csv errors") {
  figo::test::TempDir dir("csv");
  CHECK_THROWS_AS(read_results_csv(dir / "none.csv"), Error);
  figo::test::write_file(dir / "a.csv", "a,b\n");
  CHECK_THROWS_AS(read_results_csv(dir / "a.csv"), Error);
  figo::test::write_file(dir / "b.csv", "level,method,correct,total,accuracy,seed\nclean,none,1,2\n");
  CHECK_THROWS_AS(read_results_csv(dir / "b.csv"), Error);
}
