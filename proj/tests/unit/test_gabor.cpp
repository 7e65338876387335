#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "figo/error.hpp"
#include "figo/gabor.hpp"
#include "figo/synth.hpp"
#include "support.hpp"

using namespace figo;

namespace {

constexpr double kPi = std::numbers::pi;

double deg(double rad) { return rad * 180.0 / kPi; }

// Distance between two axial angles (period pi), in degrees.
double axial_diff_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), kPi);
  return deg(std::min(d, kPi - d));
}

FingerprintImage sinusoid(double normal_deg, double wavelength, int size = 96) {
  return normalize(render_pattern(constant_pattern(normal_deg * kPi / 180.0, wavelength), size, size).image,
                   RangeTag::Unit);
}

struct SpectrumPeak {
  double freq;
  double angle;  // wave-normal direction in [0, pi)
};

// Independent oracle: direct 2-D discrete-time Fourier transform on a fine
// frequency grid, evaluated separably (rows first, then columns).
SpectrumPeak spectrum_peak(const FingerprintImage& img) {
  const int w = img.width(), h = img.height();
  double mean = 0.0;
  for (double v : img.pixels()) mean += v;
  mean /= static_cast<double>(img.size());
  const double step = 0.0025, fmax = 0.35;
  std::vector<double> fxs, fys;
  for (double f = -fmax; f <= fmax + 1e-12; f += step) fxs.push_back(f);
  for (double f = 0.0; f <= fmax + 1e-12; f += step) fys.push_back(f);

  // rows[y][i] = sum_x (img - mean) * exp(-2 pi i fx x)
  std::vector<std::vector<std::complex<double>>> rows(static_cast<std::size_t>(h),
                                                     std::vector<std::complex<double>>(fxs.size()));
  for (int y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < fxs.size(); ++i) {
      std::complex<double> acc = 0.0;
      for (int x = 0; x < w; ++x) acc += (img.at(x, y) - mean) * std::polar(1.0, -2 * kPi * fxs[i] * x);
      rows[static_cast<std::size_t>(y)][i] = acc;
    }
  }
  SpectrumPeak best{0, 0};
  double best_power = -1.0;
  for (std::size_t j = 0; j < fys.size(); ++j) {
    for (std::size_t i = 0; i < fxs.size(); ++i) {
      const double f = std::hypot(fxs[i], fys[j]);
      if (f < 0.03) continue;
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y) acc += rows[static_cast<std::size_t>(y)][i] * std::polar(1.0, -2 * kPi * fys[j] * y);
      const double power = std::norm(acc);
      if (power > best_power) {
        best_power = power;
        double a = std::atan2(fys[j], fxs[i]);
        if (a >= kPi) a -= kPi;
        best = {f, a};
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("orientation of flat and rotated images") {
  SUBCASE("constant image has no reliable block") {
    const FingerprintImage flat(64, 64, RangeTag::Unit, 0.4);
    const auto field = estimate_orientation(flat);
    for (int by = 0; by < field.rows; ++by) {
      for (int bx = 0; bx < field.cols; ++bx) {
        CHECK(field.coherence_at(bx, by) < 1e-9);
        CHECK_FALSE(field.reliable(bx, by));
      }
    }
    const auto freqs = estimate_frequency(flat, field);
    for (double f : freqs.freqs) CHECK(f == FrequencyField::kInvalid);
  }
  SUBCASE("angles stay in [0, pi) and coherence in [0, 1]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto field = estimate_orientation(figo::test::synthetic_unit(seed, 80));
      for (double a : field.angles) REQUIRE((a >= 0.0 && a < kPi));
      for (double c : field.coherence) REQUIRE((c >= 0.0 && c <= 1.0 + 1e-12));
    }
  }
  SUBCASE("quarter turn shifts every angle by 90 degrees") {
    const auto img = figo::test::synthetic_unit(21, 96);
    FingerprintImage turned(96, 96, RangeTag::Unit);
    // turned(x, y) = img(y, 95 - x): a 90 degree rotation of the raster.
    for (int y = 0; y < 96; ++y) {
      for (int x = 0; x < 96; ++x) turned.at(x, y) = img.at(y, 95 - x);
    }
    const auto a = estimate_orientation(img);
    const auto b = estimate_orientation(turned);
    int checked = 0;
    for (int by = 0; by < a.rows; ++by) {
      for (int bx = 0; bx < a.cols; ++bx) {
        // Block (bx, by) of the original lands at (cols-1-by, bx).
        const int tx = a.cols - 1 - by, ty = bx;
        if (a.coherence_at(bx, by) < 0.5) continue;
        CHECK(axial_diff_deg(a.angle(bx, by) + kPi / 2, b.angle(tx, ty)) <= 5.0);
        ++checked;
      }
    }
    CHECK(checked > 10);
  }
  CHECK_THROWS_AS(estimate_orientation(FingerprintImage(16, 16, RangeTag::Unit)), Error);
}

TEST_CASE("frequency examples") {
  SUBCASE("wavelength 10") {
    const auto img = sinusoid(30, 10);
    const auto field = estimate_orientation(img);
    const auto freqs = estimate_frequency(img, field);
    for (int by = 0; by < field.rows; ++by) {
      for (int bx = 0; bx < field.cols; ++bx) {
        if (field.reliable(bx, by) && freqs.valid(bx, by)) CHECK(std::abs(freqs.at(bx, by) - 0.1) <= 0.02);
      }
    }
  }
  SUBCASE("wavelength 4") {
    const auto img = sinusoid(60, 4);
    const auto field = estimate_orientation(img);
    const auto freqs = estimate_frequency(img, field);
    int valid = 0;
    for (int by = 0; by < field.rows; ++by) {
      for (int bx = 0; bx < field.cols; ++bx) {
        if (!field.reliable(bx, by) || !freqs.valid(bx, by)) continue;
        CHECK(std::abs(freqs.at(bx, by) - 0.25) <= 0.03);
        ++valid;
      }
    }
    CHECK(valid > 0);
  }
  SUBCASE("values are in range or sentinel") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto img = figo::test::synthetic_unit(seed, 96);
      const auto freqs = estimate_frequency(img, estimate_orientation(img));
      for (double f : freqs.freqs) {
        REQUIRE((f == FrequencyField::kInvalid || (f >= FrequencyField::kMin && f <= FrequencyField::kMax)));
      }
    }
  }
}

TEST_CASE("gabor enhancement") {
  const GaborParams params;
  SUBCASE("constant image passes through") {
    const FingerprintImage flat(64, 64, RangeTag::Unit, 0.3);
    CHECK(gabor_pipeline(flat, {}) == flat);
  }
  SUBCASE("clean sinusoid stays correlated with the input") {
    const auto img = sinusoid(30, 10);
    const auto out = gabor_pipeline(img, {});
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      ma += img.pixels()[i];
      mb += out.pixels()[i];
    }
    ma /= static_cast<double>(img.size());
    mb /= static_cast<double>(img.size());
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double a = img.pixels()[i] - ma, b = out.pixels()[i] - mb;
      sab += a * b;
      saa += a * a;
      sbb += b * b;
    }
    CHECK(sab / std::sqrt(saa * sbb) >= 0.9);
  }
  SUBCASE("a kernel turned 90 degrees suppresses the ridges") {
    const auto img = sinusoid(30, 10);
    auto field = estimate_orientation(img);
    const auto freqs = estimate_frequency(img, field);
    for (double& a : field.angles) a = std::fmod(a + kPi / 2, kPi);
    const auto out = gabor_enhance(img, field, freqs, params);
    for (int by = 0; by < field.rows; ++by) {
      for (int bx = 0; bx < field.cols; ++bx) {
        if (!field.reliable(bx, by) || !freqs.valid(bx, by)) continue;
        auto variance = [&](const FingerprintImage& im) {
          double s = 0, s2 = 0;
          int n = 0;
          for (int y = by * 16; y < by * 16 + 16; ++y) {
            for (int x = bx * 16; x < bx * 16 + 16; ++x) {
              s += im.at(x, y);
              s2 += im.at(x, y) * im.at(x, y);
              ++n;
            }
          }
          return s2 / n - (s / n) * (s / n);
        };
        CHECK(variance(out) < 0.25 * variance(img));
      }
    }
  }
  SUBCASE("field shape mismatch") {
    const auto img = sinusoid(30, 10, 64);
    const auto field = estimate_orientation(sinusoid(30, 10, 96));
    const auto freqs = estimate_frequency(sinusoid(30, 10, 96), field);
    CHECK_THROWS_AS(gabor_enhance(img, field, freqs, params), Error);
  }
  SUBCASE("deterministic") {
    const auto img = figo::test::synthetic_unit(4, 64);
    CHECK(gabor_pipeline(img, {}) == gabor_pipeline(img, {}));
  }
}

TEST_CASE("default kernel covers three sigma") {
  const GaborParams p;
  CHECK(p.kernel_radius >= 3 * std::max(p.sigma_x, p.sigma_y));
  CHECK(gabor_kernel(0.3, 0.1, p).size() == static_cast<std::size_t>((2 * p.kernel_radius + 1) * (2 * p.kernel_radius + 1)));
}

TEST_SUITE("property") {
  TEST_CASE("gabor kernels are zero-mean") {
    Rng rng(555);
    for (int trial = 0; trial < 300; ++trial) {
      GaborParams p;
      p.sigma_x = rng.uniform(2.0, 6.0);
      p.sigma_y = rng.uniform(2.0, 6.0);
      p.kernel_radius = static_cast<int>(std::ceil(3 * std::max(p.sigma_x, p.sigma_y)));
      const auto k = gabor_kernel(rng.uniform(0.0, kPi), rng.uniform(FrequencyField::kMin, FrequencyField::kMax), p);
      double sum = 0.0;
      for (double v : k) sum += v;
      REQUIRE(std::abs(sum) < 1e-6);
    }
  }

  TEST_CASE("synthetic fingerprints are seeded") {
    CHECK(synth_fingerprint(0, 64, 64).image == synth_fingerprint(0, 64, 64).image);
    CHECK(mean_abs_diff(synth_fingerprint(1, 64, 64).image, synth_fingerprint(2, 64, 64).image) > 0.0);
    CHECK_THROWS_AS(synth_fingerprint(0, 31, 64), Error);
  }
}

TEST_SUITE("oracle") {
  TEST_CASE("generator spectrum peaks at the requested wave") {
    const auto img = sinusoid(30, 10, 100);
    const auto peak = spectrum_peak(img);
    CHECK(std::abs(peak.freq - 0.1) <= 0.02);
    CHECK(axial_diff_deg(peak.angle, kPi / 6) <= 5.0);

    for (const auto [angle, wavelength] : {std::pair{75.0, 8.0}, {140.0, 12.0}, {5.0, 9.0}}) {
      const auto p = spectrum_peak(sinusoid(angle, wavelength, 100));
      CHECK(std::abs(p.freq - 1.0 / wavelength) <= 0.02);
      CHECK(axial_diff_deg(p.angle, angle * kPi / 180.0) <= 5.0);
    }
  }

  TEST_CASE("orientation and frequency match the generator") {
    int total = 0, orient_ok = 0, freq_ok = 0, freq_total = 0;
    for (int a = 0; a < 180; a += 15) {
      for (double wavelength : {8.0, 10.0, 12.0}) {
        const double normal = a * kPi / 180.0;
        const auto synth = render_pattern(constant_pattern(normal, wavelength), 96, 96);
        const auto img = normalize(synth.image, RangeTag::Unit);
        const auto field = estimate_orientation(img);
        const auto freqs = estimate_frequency(img, field);
        for (int by = 0; by < field.rows; ++by) {
          for (int bx = 0; bx < field.cols; ++bx) {
            if (!field.reliable(bx, by)) continue;
            ++total;
            orient_ok += axial_diff_deg(field.angle(bx, by), synth.ground_truth.angle(bx, by)) <= 5.0;
            ++freq_total;
            freq_ok += freqs.valid(bx, by) && std::abs(freqs.at(bx, by) - 1.0 / wavelength) <= 0.02;
          }
        }
      }
    }
    INFO("orientation " << orient_ok << "/" << total << ", frequency " << freq_ok << "/" << freq_total);
    REQUIRE(total > 0);
    CHECK(orient_ok >= 0.95 * total);
    CHECK(freq_ok >= 0.95 * freq_total);
  }

  TEST_CASE("thirty degree wave normal is seen as a 120 degree ridge") {
    const auto synth = render_pattern(constant_pattern(kPi / 6, 10), 96, 96);
    const auto field = estimate_orientation(normalize(synth.image, RangeTag::Unit));
    for (int by = 0; by < field.rows; ++by) {
      for (int bx = 0; bx < field.cols; ++bx) {
        if (field.reliable(bx, by)) CHECK(axial_diff_deg(field.angle(bx, by), 2 * kPi / 3) <= 5.0);
      }
    }
  }
}
