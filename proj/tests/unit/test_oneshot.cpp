#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "figo/error.hpp"
#include "figo/oneshot.hpp"
#include "figo/pipeline.hpp"
#include "support.hpp"

using namespace figo;
using figo::test::rel_error;
using figo::test::TempDir;

namespace {

OneshotConfig small_config(std::uint64_t seed = 5) {
  OneshotConfig c;
  c.seed = seed;
  c.embedding_dim = 16;
  c.encoder_channels = {8, 8, 16, 16};
  return c;
}

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

// n identities with k[i] cheap 16x16 images each.
std::vector<IdentityImages> toy_identities(const std::vector<int>& counts) {
  std::vector<IdentityImages> ids;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    IdentityImages id{"id" + std::to_string(i), {}};
    for (int j = 0; j < counts[i]; ++j) {
      id.images.emplace_back(16, 16, RangeTag::Unit, (static_cast<double>(i) * 7 + j) / 100.0);
    }
    ids.push_back(std::move(id));
  }
  return ids;
}

std::vector<IdentityImages> synthetic_identities(int first, int n, int impressions, std::uint64_t seed) {
  std::vector<IdentityImages> ids;
  for (int s = first; s < first + n; ++s) {
    char key[16];
    std::snprintf(key, sizeof key, "s%04d", s);
    ids.push_back({key, synth_subject(seed, s, impressions, 64)});
  }
  return ids;
}

}  // namespace

TEST_CASE("embedding contracts") {
  IdentityModel m = build_identity_model(64, small_config());
  Rng rng(3);
  const auto a = figo::test::random_image(rng, 64, 64, RangeTag::Unit);
  const auto b = figo::test::random_image(rng, 64, 64, RangeTag::Unit);
  const Embedding ea = embed(m, a);
  CHECK(ea.size() == 16);
  CHECK(embed(m, a) == ea);
  CHECK(embed(m, b) != ea);
  for (double v : ea) CHECK(std::isfinite(v));
  // Raw 8-bit input is normalized before encoding.
  const Embedding raw = embed(m, normalize(a, RangeTag::RawU8));
  for (std::size_t k = 0; k < ea.size(); ++k) CHECK(raw[k] == doctest::Approx(ea[k]).epsilon(1e-9));
  CHECK(code_of([&] { embed(m, figo::test::random_image(rng, 48, 48, RangeTag::Unit)); }) ==
        ErrorCode::ResolutionMismatch);
  CHECK(code_of([&] { build_identity_model(40, small_config()); }) == ErrorCode::BadResolution);

  const auto batch = embed_batch(m, std::vector<FingerprintImage>{a, b});
  REQUIRE(batch.size() == 2);
  for (std::size_t k = 0; k < ea.size(); ++k) CHECK(batch[0][k] == doctest::Approx(ea[k]).epsilon(1e-12));

  const double s = similarity(m, a, b);
  CHECK(s > 0.0);
  CHECK(s < 1.0);
}

TEST_CASE("pairing examples") {
  const auto ids = toy_identities({2, 2, 2});
  const auto all = make_pair_indices(ids, std::nullopt, 1);
  CHECK(std::count_if(all.begin(), all.end(), [](const PairIndex& p) { return p.label == 1; }) == 3);
  CHECK(std::count_if(all.begin(), all.end(), [](const PairIndex& p) { return p.label == 0; }) == 12);

  const auto ratio = make_pair_indices(toy_identities({3, 3, 3, 3}), 1.0, 7);
  const auto pos = std::count_if(ratio.begin(), ratio.end(), [](const PairIndex& p) { return p.label == 1; });
  CHECK(pos == 12);
  CHECK(static_cast<long>(ratio.size()) - pos == pos);
  const auto again = make_pair_indices(toy_identities({3, 3, 3, 3}), 1.0, 7);
  REQUIRE(again.size() == ratio.size());
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    CHECK(again[i].identity_a == ratio[i].identity_a);
    CHECK(again[i].image_b == ratio[i].image_b);
  }
  for (const auto& p : ratio) CHECK((p.label == 1) == (p.identity_a == p.identity_b));

  CHECK(code_of([] { make_pair_indices(toy_identities({3}), 1.0, 0); }) == ErrorCode::TooFewIdentities);
  CHECK(code_of([] { make_pair_indices(toy_identities({1, 1, 1}), 1.0, 0); }) == ErrorCode::TooFewIdentities);
}

TEST_CASE("training contracts") {
  const auto ids = synthetic_identities(1, 3, 2, 41);
  auto pairs = make_pairs(ids, 1.0, 2);
  OneshotConfig cfg = small_config(8);
  cfg.epochs = 3;
  IdentityModel m = build_identity_model(64, cfg);
  const TrainReport r = train_oneshot(m, pairs);
  CHECK(r.epoch_loss.size() == 3);
  CHECK(r.checksum == m.checksum());
  for (double l : r.epoch_loss) CHECK(std::isfinite(l));

  std::vector<LabeledPair> only_pos;
  for (const auto& p : pairs) {
    if (p.label == 1) only_pos.push_back(p);
  }
  CHECK(code_of([&] { train_oneshot(m, only_pos); }) == ErrorCode::DegeneratePairs);
}

TEST_CASE("overfitting four pairs") {
  const auto ids = synthetic_identities(1, 4, 2, 77);
  const std::vector<LabeledPair> pairs{
      {ids[0].images[0], ids[0].images[1], 1},
      {ids[1].images[0], ids[1].images[1], 1},
      {ids[0].images[0], ids[2].images[0], 0},
      {ids[1].images[1], ids[3].images[0], 0},
  };
  OneshotConfig cfg = small_config(9);
  cfg.epochs = 300;
  IdentityModel m = build_identity_model(64, cfg);
  const TrainReport r = train_oneshot(m, pairs);
  INFO("final loss " << r.epoch_loss.back());
  CHECK(r.epoch_loss.size() == 300);
  CHECK(pair_loss(m, pairs, false) < 0.1);
}

TEST_CASE("trained model separates held-out pairs") {
  // Train on impressions 0-2 of five subjects; score pairs that use impression 3.
  auto ids = synthetic_identities(1, 5, 4, 19);
  std::vector<IdentityImages> train = ids;
  for (auto& id : train) id.images.pop_back();
  OneshotConfig cfg = small_config(4);
  cfg.epochs = 30;
  IdentityModel m = build_identity_model(64, cfg);
  train_oneshot(m, make_pairs(train, 1.0, 4));
  double pos = 0, neg = 0;
  int np = 0, nn = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        const double s = similarity(m, ids[i].images[3], ids[j].images[k]);
        (i == j ? pos : neg) += s;
        (i == j ? np : nn) += 1;
      }
    }
  }
  INFO("positive " << pos / np << " negative " << neg / nn);
  CHECK(pos / np > neg / nn);
}

TEST_CASE("identification") {
  IdentityModel m = build_identity_model(64, small_config());
  const auto ids = synthetic_identities(1, 3, 2, 3);
  Gallery g(m.checksum(), m.embedding_dim());
  CHECK(code_of([&] { identify(m, ids[0].images[0], g); }) == ErrorCode::EmptyGallery);

  SUBCASE("singleton gallery") {
    enroll(m, g, "only", ids[1].images[0]);
    const auto r = identify(m, ids[0].images[1], g);
    CHECK(r.best == "only");
    CHECK(r.ranking.size() == 1);
  }
  SUBCASE("ties go to the smaller key") {
    enroll(m, g, "b", ids[0].images[0]);
    enroll(m, g, "a", ids[0].images[0]);
    const auto r = identify(m, ids[2].images[1], g);
    CHECK(r.best == "a");
    CHECK(r.ranking[0].score == r.ranking[1].score);
  }
  SUBCASE("ranking is descending and complete") {
    for (const auto& id : ids) enroll(m, g, id.key, id.images[0]);
    const auto r = identify(m, ids[1].images[0], g);
    REQUIRE(r.ranking.size() == 3);
    for (std::size_t i = 1; i < r.ranking.size(); ++i) CHECK(r.ranking[i - 1].score >= r.ranking[i].score);
    // The probe is the enrolled image itself, so it scores s0, the maximum.
    CHECK(r.best == ids[1].key);
    CHECK(r.score == similarity(m, ids[1].images[0], ids[1].images[0]));
    const auto j = to_json(r);
    CHECK(j["best"] == ids[1].key);
    CHECK(j["ranking"].size() == 3);
  }
  SUBCASE("gallery rules") {
    enroll(m, g, "x", ids[0].images[0]);
    CHECK(code_of([&] { enroll(m, g, "x", ids[1].images[0]); }) == ErrorCode::SchemaViolation);
    CHECK(g.remove("x"));
    CHECK_FALSE(g.remove("x"));
    Gallery other(m.checksum() + 1, m.embedding_dim());
    CHECK(code_of([&] { enroll(m, other, "y", ids[0].images[0]); }) == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("gallery files") {
  TempDir dir("gallery");
  IdentityModel m = build_identity_model(64, small_config());
  const auto ids = synthetic_identities(1, 3, 1, 8);
  Gallery g(m.checksum(), m.embedding_dim());
  for (const auto& id : ids) enroll(m, g, id.key, id.images[0]);
  g.save(dir / "g.db");
  const Gallery back = Gallery::load(dir / "g.db");
  CHECK(back.keys() == g.keys());
  CHECK(back.model_checksum() == g.model_checksum());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::equal(back.embedding(i).begin(), back.embedding(i).end(), g.embedding(i).begin()));
  }
  back.save(dir / "h.db");
  CHECK(figo::test::read_file(dir / "g.db") == figo::test::read_file(dir / "h.db"));

  CHECK(code_of([&] { Gallery::load(dir / "none.db"); }) == ErrorCode::FileNotFound);
  const std::string bytes = figo::test::read_file(dir / "g.db");
  figo::test::write_file(dir / "cut.db", bytes.substr(0, bytes.size() - 8));
  CHECK(code_of([&] { Gallery::load(dir / "cut.db"); }) == ErrorCode::CorruptHeader);
}

TEST_CASE("identity checkpoint errors") {
  TempDir dir("id_ckpt");
  CHECK(code_of([&] { load_identity_checkpoint(dir / "none.bin"); }) == ErrorCode::MissingCheckpoint);
  IdentityModel m = build_identity_model(64, small_config());
  save_checkpoint(m, dir / "m.bin");
  std::string manifest = figo::test::read_file(dir / "m.bin.json");
  const std::string field = "\"format_version\": 1";
  const auto pos = manifest.find(field);
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, field.size(), "\"format_version\": 99");
  figo::test::write_file(dir / "m.bin.json", manifest);
  CHECK(code_of([&] { load_identity_checkpoint(dir / "m.bin"); }) == ErrorCode::VersionMismatch);
}

TEST_CASE("config parsing") {
  const auto c = oneshot_config_from_json({{"negatives_per_positive", "all"}, {"epochs", 3}});
  CHECK_FALSE(c.negatives_per_positive.has_value());
  CHECK(c.epochs == 3);
  CHECK(c.learning_rate == 0.001);
  CHECK(c.head_width == 6);
  CHECK(oneshot_config_from_json({{"paper_faithful", true}}).embedding_dim == 2);
  CHECK_THROWS_AS(oneshot_config_from_json({{"embeding_dim", 3}}), Error);
  CHECK_THROWS_AS(oneshot_config_from_json({{"epochs", 0}}), Error);
  const auto round = oneshot_config_from_json(to_json(c));
  CHECK(to_json(round).dump() == to_json(c).dump());
}

TEST_SUITE("property") {
  TEST_CASE("pair counts follow the combinatorics") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(5));
      std::vector<int> counts;
      for (int i = 0; i < n; ++i) counts.push_back(1 + static_cast<int>(rng.below(6)));
      if (std::all_of(counts.begin(), counts.end(), [](int k) { return k < 2; })) counts[0] = 2;
      const auto ids = toy_identities(counts);
      std::size_t total = 0, within = 0;
      for (int k : counts) {
        total += static_cast<std::size_t>(k);
        within += static_cast<std::size_t>(k * (k - 1) / 2);
      }
      const std::size_t all_pairs = total * (total - 1) / 2;
      const auto pairs = make_pair_indices(ids, std::nullopt, rng.next());
      const auto pos = static_cast<std::size_t>(
          std::count_if(pairs.begin(), pairs.end(), [](const PairIndex& p) { return p.label == 1; }));
      REQUIRE(pos == within);
      REQUIRE(pairs.size() - pos == all_pairs - within);
      std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> seen;
      for (const auto& p : pairs) REQUIRE(seen.insert({p.identity_a, p.image_a, p.identity_b, p.image_b}).second);

      // Uniform k: n*k*(k-1)/2 positives.
      const int k = 1 + static_cast<int>(rng.below(6));
      if (k >= 2) {
        const auto uniform = make_pair_indices(toy_identities(std::vector<int>(static_cast<std::size_t>(n), k)), 1.0, 3);
        const auto upos = std::count_if(uniform.begin(), uniform.end(), [](const PairIndex& p) { return p.label == 1; });
        REQUIRE(upos == n * k * (k - 1) / 2);
      }
    }
  }

  TEST_CASE("similarity is symmetric and distances are a metric") {
    IdentityModel m = build_identity_model(64, small_config(15));
    Rng rng(16);
    std::vector<FingerprintImage> imgs;
    for (int i = 0; i < 20; ++i) {
      imgs.push_back(i % 2 ? figo::test::random_image(rng, 64, 64, RangeTag::Unit)
                           : figo::test::synthetic_unit(rng.next(), 64));
    }
    for (int trial = 0; trial < 100; ++trial) {
      const auto& a = imgs[rng.below(imgs.size())];
      const auto& b = imgs[rng.below(imgs.size())];
      const auto& c = imgs[rng.below(imgs.size())];
      REQUIRE(similarity(m, a, b) == similarity(m, b, a));
      const auto dab = distance(m, a, b), dba = distance(m, b, a), dbc = distance(m, b, c), dac = distance(m, a, c);
      REQUIRE(dab == dba);
      for (std::size_t i = 0; i < dab.size(); ++i) {
        REQUIRE(dab[i] >= 0.0);
        REQUIRE(dac[i] <= dab[i] + dbc[i] + 1e-12);
      }
      const auto daa = distance(m, a, a);
      REQUIRE(std::all_of(daa.begin(), daa.end(), [](double v) { return v == 0.0; }));
    }
  }

  TEST_CASE("identical inputs always score the same constant") {
    for (std::uint64_t seed : {1u, 2u}) {
      IdentityModel m = build_identity_model(64, small_config(seed));
      Rng rng(seed + 100);
      const double s0 = similarity(m, figo::test::synthetic_unit(1, 64), figo::test::synthetic_unit(1, 64));
      for (int trial = 0; trial < 30; ++trial) {
        const auto x = trial % 2 ? figo::test::random_image(rng, 64, 64, RangeTag::Unit)
                                 : figo::test::synthetic_unit(rng.next(), 64);
        REQUIRE(similarity(m, x, x) == s0);
        // The monotone head makes s0 the highest score the model can give.
        REQUIRE(similarity(m, x, figo::test::synthetic_unit(rng.next(), 64)) <= s0);
      }
    }
  }

  TEST_CASE("argmax is invariant under monotone score transforms") {
    Rng rng(44);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<RankedEntry> scores;
      const int n = 1 + static_cast<int>(rng.below(12));
      for (int i = 0; i < n; ++i) {
        // Coarse values so that ties occur.
        scores.push_back({"k" + std::to_string(rng.below(1000)) + "_" + std::to_string(i),
                          std::round(rng.uniform(0, 1) * 8) / 8});
      }
      const auto base = rank_scores(scores);
      for (auto f : {+[](double s) { return std::exp(3 * s); }, +[](double s) { return s * s * s + 2 * s; },
                     +[](double s) { return std::log1p(s) - 7; }}) {
        auto moved = scores;
        for (auto& e : moved) e.score = f(e.score);
        const auto ranked = rank_scores(moved);
        REQUIRE(ranked.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) REQUIRE(ranked[i].key == base[i].key);
      }
    }
  }

  TEST_CASE("twins share one parameter set") {
    IdentityModel m = build_identity_model(64, small_config(2));
    auto params = m.parameters();
    std::set<const nn::Parameter*> unique(params.begin(), params.end());
    std::set<std::string> names;
    for (const auto* p : params) names.insert(p->name);
    CHECK(unique.size() == params.size());
    CHECK(names.size() == params.size());

    const auto a = figo::test::synthetic_unit(3, 64), b = figo::test::synthetic_unit(4, 64);
    const Embedding ea = embed(m, a), eb = embed(m, b);
    m.encoder_parameters().front()->value[0] += 0.5;
    const Embedding ea2 = embed(m, a), eb2 = embed(m, b);
    CHECK(ea2 != ea);
    CHECK(eb2 != eb);
    // A pair evaluated as one stacked batch sees the same embeddings.
    const double s_pair = m.score(ea2, eb2);
    CHECK(s_pair == doctest::Approx(similarity(m, a, b)).epsilon(1e-12));
  }

  TEST_CASE("identifier checkpoint round trip is bitwise") {
    TempDir dir("id_rt");
    IdentityModel m = build_identity_model(64, small_config(6));
    m.epoch = 2;
    save_checkpoint(m, dir / "a.bin");
    IdentityModel back = load_identity_checkpoint(dir / "a.bin");
    CHECK(back.checksum() == m.checksum());
    CHECK(back.epoch == 2);
    CHECK(to_json(back.config()).dump() == to_json(m.config()).dump());
    save_checkpoint(back, dir / "b.bin");
    CHECK(figo::test::read_file(dir / "a.bin") == figo::test::read_file(dir / "b.bin"));
    CHECK(figo::test::read_file(dir / "a.bin.json") == figo::test::read_file(dir / "b.bin.json"));
    const auto x = figo::test::synthetic_unit(8, 64);
    CHECK(embed(back, x) == embed(m, x));
  }

  TEST_CASE("identifier training is seeded") {
    const auto ids = synthetic_identities(1, 8, 3, 61);
    auto pairs = make_pairs(ids, 1.0, 62);  // 24 positives + 24 negatives
    REQUIRE(pairs.size() == 48);
    auto run = [&] {
      OneshotConfig cfg = small_config(63);
      cfg.batch_size = 10;
      cfg.epochs = 10;  // 5 batches per epoch, 50 steps
      IdentityModel m = build_identity_model(64, cfg);
      return train_oneshot(m, pairs).checksum;
    };
    const auto a = run();
    CHECK(a == run());
  }
}

TEST_SUITE("oracle") {
  TEST_CASE("pair loss gradient matches finite differences") {
    const auto ids = synthetic_identities(1, 3, 2, 91);
    const auto pairs = make_pairs(ids, std::nullopt, 92);
    IdentityModel m = build_identity_model(64, small_config(93));
    auto loss = [&] { return pair_loss(m, pairs, false); };
    for (auto* p : m.parameters()) p->zero_grad();
    pair_loss(m, pairs, true);

    // Scalar probe: scale the raw head output weights by s, d/ds at s = 1.
    nn::Parameter& w = m.head_output_weight();
    double analytic = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) analytic += w.value[i] * w.grad[i];
    const double h = 1e-6;
    const nn::Buffer keep = w.value;
    for (std::size_t i = 0; i < w.size(); ++i) w.value[i] = keep[i] * (1 + h);
    const double up = loss();
    for (std::size_t i = 0; i < w.size(); ++i) w.value[i] = keep[i] * (1 - h);
    const double down = loss();
    w.value = keep;
    const double numeric = (up - down) / (2 * h);
    INFO("probe analytic " << analytic << " numeric " << numeric);
    CHECK(rel_error(analytic, numeric) < 1e-3);

    // Entry-wise on the shared encoder: both twins feed this gradient.
    for (nn::Parameter* p : m.parameters()) {
      for (std::size_t i : {std::size_t{0}, p->size() / 2}) {
        const double k = p->value[i];
        p->value[i] = k + h;
        const double lu = loss();
        p->value[i] = k - h;
        const double ld = loss();
        p->value[i] = k;
        const double n = (lu - ld) / (2 * h);
        INFO(p->name << "[" << i << "] analytic " << p->grad[i] << " numeric " << n);
        if (std::abs(n) < 1e-8 && std::abs(p->grad[i]) < 1e-8) continue;
        CHECK(rel_error(p->grad[i], n) < 1e-3);
      }
    }
  }
}
