// Acceptance report: one PASS/FAIL line per criterion. Criteria 1 and 2 rerun
// the property and oracle doctest suites linked into this binary; the rest
// run the default experiment configuration.

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "figo/config.hpp"
#include "figo/pipeline.hpp"
#include "support.hpp"

using namespace figo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// Runs one doctest suite in-process; returns (all passed, seconds).
std::pair<bool, double> run_suite(const char* suite) {
  doctest::Context ctx;
  ctx.setOption("test-suite", suite);
  ctx.setOption("no-version", true);
  std::ostringstream sink;
  ctx.setCout(&sink);
  const auto t0 = Clock::now();
  const int rc = ctx.run();
  const double secs = seconds_since(t0);
  if (rc != 0) std::cout << sink.str();
  return {rc == 0 && !ctx.shouldExit(), secs};
}

double acc(const SuiteResult& r, Level l, EnhanceMethod m) {
  const CellResult& c = r.cell(l, m);
  return c.missing ? -1.0 : c.accuracy();
}

std::string ranking_dump(const Identification& id) { return to_json(id).dump(); }

}  // namespace

int main() {
  {
    const auto [ok, secs] = run_suite("property");
    report(1, ok && secs < 120.0, "property suite " + std::string(ok ? "passed" : "failed") + " in " +
                                      fmt(secs) + " s (limit 120 s)");
  }
  {
    const auto [ok, secs] = run_suite("oracle");
    report(2, ok && secs < 300.0, "oracle suite " + std::string(ok ? "passed" : "failed") + " in " +
                                      fmt(secs) + " s (limit 300 s)");
  }

  const RunConfig config = run_config_from_json(nlohmann::json::object());
  const auto t0 = Clock::now();
  const SuiteResult suite = run_experiment_suite(config, [](const std::string& msg) { std::cerr << msg << '\n'; });
  const double suite_secs = seconds_since(t0);
  for (Level l : kAllLevels) {
    std::cout << "  " << to_string(l);
    for (EnhanceMethod m : kAllMethods) {
      const CellResult& c = suite.cell(l, m);
      std::cout << "  " << to_string(m) << "=" << (c.missing ? "missing" : std::to_string(c.correct) + "/" +
                                                                         std::to_string(c.total));
    }
    std::cout << '\n';
  }

  {
    const double clean = acc(suite, Level::Clean, EnhanceMethod::None);
    const double easy = acc(suite, Level::Easy, EnhanceMethod::None);
    const double medium = acc(suite, Level::Medium, EnhanceMethod::None);
    const double hard = acc(suite, Level::Hard, EnhanceMethod::None);
    const bool ok = clean >= easy && easy >= medium && medium >= hard && clean >= 0.90 && hard <= clean - 0.30 &&
                    suite_secs <= 15 * 60;
    report(3, ok, "none: clean " + fmt(clean) + " easy " + fmt(easy) + " medium " + fmt(medium) + " hard " +
                      fmt(hard) + " (need monotone, clean >= 0.9, hard <= clean - 0.3), " + fmt(suite_secs) + " s");
  }
  {
    const double pm = acc(suite, Level::Medium, EnhanceMethod::Pix2Pix);
    const double gm = acc(suite, Level::Medium, EnhanceMethod::Gabor);
    const double ph = acc(suite, Level::Hard, EnhanceMethod::Pix2Pix);
    const double gh = acc(suite, Level::Hard, EnhanceMethod::Gabor);
    const double nh = acc(suite, Level::Hard, EnhanceMethod::None);
    const bool ok = pm >= gm && ph >= gh && ph >= nh + 0.10 && pm >= 0 && suite_secs <= 25 * 60;
    report(4, ok, "medium pix2pix " + fmt(pm) + " vs gabor " + fmt(gm) + "; hard pix2pix " + fmt(ph) +
                      " vs gabor " + fmt(gh) + " and none " + fmt(nh) + " + 0.10");
  }
  {
    bool all = true;
    for (Level l : kAllLevels) all = all && !suite.cell(l, EnhanceMethod::GaborThenPix2Pix).missing;
    const double ch = acc(suite, Level::Hard, EnhanceMethod::GaborThenPix2Pix);
    const double gh = acc(suite, Level::Hard, EnhanceMethod::Gabor);
    report(5, all && ch >= gh,
           "chained cells " + std::string(all ? "present at all levels" : "missing") + "; hard chained " + fmt(ch) +
               " vs gabor " + fmt(gh));
  }

  // Enrollment without retraining: a gallery of all 50 synthetic subjects,
  // then a 51st that the identifier never saw.
  {
    IdentityModel model = *suite.identity;
    const FingerprintSet set = load_fingerprint_set(suite.config);
    Gallery gallery = build_gallery(model, set, set.subjects());
    const int newcomer = static_cast<int>(set.subjects().size());
    SampleRecord rec;
    rec.subject_id = newcomer;
    rec.hand = Hand::Left;
    rec.finger = Finger::Index;
    const std::string key = rec.identity_key();
    const auto images = synth_subject(suite.config.seeds.data, newcomer, 2, suite.config.resolution);

    figo::test::TempDir dir("acceptance");
    gallery.save(dir / "before.db");
    std::vector<std::string> before;
    for (const Sample& s : set.clean) {
      if (s.record.impression == 1) before.push_back(ranking_dump(identify(model, s.image, gallery)));
    }

    enroll(model, gallery, key, images[0]);
    const Identification hit = identify(model, images[1], gallery);
    const bool rank1 = hit.best == key;

    gallery.remove(key);
    gallery.save(dir / "after.db");
    bool same = figo::test::read_file(dir / "before.db") == figo::test::read_file(dir / "after.db");
    std::size_t i = 0;
    for (const Sample& s : set.clean) {
      if (s.record.impression == 1) same = same && ranking_dump(identify(model, s.image, gallery)) == before[i++];
    }
    report(6, rank1 && same,
           "subject " + key + " enrolled into a " + std::to_string(gallery.size()) + "-identity gallery: rank-1 " +
               (rank1 ? "correct" : "wrong (got " + hit.best + ")") + "; rankings after removal " +
               (same ? "byte-identical" : "differ") + " over " + std::to_string(before.size()) + " probes");
  }

  // Provenance: rebuild results.csv from its own header.
  {
    figo::test::TempDir dir("provenance");
    write_suite_outputs(suite, dir / "first");
    const RunConfig replay = config_from_results(dir / "first" / "results.csv");
    const SuiteResult again = run_experiment_suite(replay);
    write_suite_outputs(again, dir / "second");
    const bool same = figo::test::read_file(dir / "first" / "results.csv") ==
                      figo::test::read_file(dir / "second" / "results.csv");
    report(7, same, std::string("results.csv regenerated from its '# config:' header is ") +
                        (same ? "bit-identical" : "different"));
  }

  return failures == 0 ? 0 : 1;
}
