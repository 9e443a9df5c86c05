#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "binori/error.hpp"
#include "binori/features.hpp"
#include "binori/renderer.hpp"
#include "binori/speech.hpp"

using namespace binori;

namespace {

Spectrum random_spectrum(std::mt19937_64& g, std::size_t bins, double bin_hz) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-8.0, 3.0);
  Spectrum s{std::vector<Complex>(bins), bin_hz, 2 * (bins - 1)};
  for (auto& b : s.bins) b = std::pow(10.0, u(g)) * Complex(n(g), n(g));
  return s;
}

BinauralRecording swap_ears(const BinauralRecording& r) {
  BinauralRecording s = r;
  std::swap(s.left, s.right);
  return s;
}

struct Scene {
  BinauralRecording rec;
  Scene(double dir, double ori, double gain = 1.0) {
    const NearFieldParams nf;
    const auto [hl, hr] = synth_hrtf(nf, 5.0, 257, 31.25);
    const auto vdp = synth_vdp(0.7, 257, 31.25);
    auto src = synth_speech(1.0, 140.0, 5);
    std::vector<double> x(src.samples().begin(), src.samples().end());
    for (double& v : x) v *= gain;
    rec = render(AudioBuffer(x, 16000), {dir, ori, 0.9, 0.18}, hl, hr, vdp, nf);
  }
};

}  // namespace

TEST_CASE("ild per bin") {
  Spectrum l{{{1, 0}, {2, 1}, {0, 0}, {0.5, 0.5}}, 100, 6}, r = l;
  for (double v : ild(l, r)) CHECK(v == 0.0);
  r.bins[1] = l.bins[1] / 2.0;
  CHECK(ild(l, r)[1] == doctest::Approx(6.0206).epsilon(1e-5));
  r.bins[3] = Complex(1e-9, 0);
  CHECK(ild(l, r)[3] == 60.0);
  CHECK(ild(r, l)[3] == -60.0);
  const auto valid = valid_bins(l, r);
  CHECK(!valid[2]);
  CHECK(ild(l, r)[2] == 0.0);
  Spectrum short_spec{{{1, 0}}, 100, 1};
  CHECK_THROWS_AS(ild(l, short_spec), Error);
  CHECK_THROWS_AS(itd(l, short_spec), Error);
}

TEST_CASE("itd per bin") {
  const std::size_t bins = 9;
  Spectrum r{std::vector<Complex>(bins, Complex(1, 0)), 250, 16}, l = r;
  for (double v : itd(l, r)) CHECK(v == 0.0);
  l.bins[4] = std::polar(1.0, std::numbers::pi / 2);
  CHECK(itd(l, r)[4] == doctest::Approx(0.25e-3).epsilon(1e-12));
  l.bins[4] = std::polar(1.0, 2 * std::numbers::pi * 1000 * 0.0007);
  CHECK(itd(l, r)[4] == doctest::Approx(-0.3e-3).epsilon(1e-9));
  CHECK(itd(l, r)[0] == 0.0);
}

TEST_CASE("interaural features negate exactly under ear swap") {
  std::mt19937_64 g(17);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_spectrum(g, 129, 62.5), b = random_spectrum(g, 129, 62.5);
    const auto i1 = ild(a, b), i2 = ild(b, a), t1 = itd(a, b), t2 = itd(b, a);
    for (std::size_t k = 0; k < i1.size(); ++k) {
      CHECK(i1[k] == -i2[k]);
      CHECK(t1[k] == -t2[k]);
    }
  }
  const Scene s(-35, 80);
  const auto x = assemble(s.rec), y = assemble(swap_ears(s.rec));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t k = 0; k < x.length(); ++k) CHECK(x.channels[c][k] == -y.channels[c][k]);
}

TEST_CASE("itd respects the phase-ambiguity bound on random spectra") {
  std::mt19937_64 g(23);
  std::size_t violations = 0, checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_spectrum(g, 65, 125.0), b = random_spectrum(g, 65, 125.0);
    const auto t = itd(a, b);
    for (std::size_t k = 1; k < t.size(); ++k) {
      ++checked;
      const double f = k * 125.0;
      violations += !(std::fabs(t[k]) <= 1.0 / (2.0 * f));
      const auto ref = std::arg(std::complex<long double>(a.bins[k]) / std::complex<long double>(b.bins[k])) /
                       (2 * std::numbers::pi_v<long double> * f);
      if (std::fabs(std::fabs(static_cast<double>(ref)) - 1.0 / (2 * f)) > 1e-9 / f)
        CHECK(std::fabs(t[k] - static_cast<double>(ref)) < 1e-12 / f);
    }
  }
  CHECK(checked == 640000);
  CHECK(violations == 0);
}

TEST_CASE("aliasing frequency") {
  CHECK(std::fabs(aliasing_frequency(0.18, 343.0) - 952.0) < 1.0);
  CHECK(aliasing_frequency(0.18, 343.0) == doctest::Approx(343.0 / 0.36).epsilon(1e-15));
  CHECK(aliasing_frequency(0.343, 343.0) == doctest::Approx(500.0));
  CHECK(aliasing_frequency(0.36, 343.0) == doctest::Approx(aliasing_frequency(0.18, 343.0) / 2));
}

TEST_CASE("band split") {
  std::vector<double> v(8001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto s = split_bands(v, 1.0, 343.0 / 0.36);
  CHECK(s.low.size() == 953);
  CHECK(s.high.size() == 7048);
  std::vector<double> joined(s.low);
  joined.insert(joined.end(), s.high.begin(), s.high.end());
  CHECK(joined == v);
  const auto top = split_bands(v, 1.0, 8000.0);
  CHECK(top.high.empty());
  CHECK(top.low == v);
  CHECK_THROWS_AS(split_bands(v, 1.0, 9000.0), Error);
  CHECK_THROWS_AS(split_bands(v, 1.0, -1.0), Error);
}

TEST_CASE("ratio feature") {
  const std::size_t n = 64;
  CHECK(ratio_feature(std::vector<double>(n, 3.0), std::vector<double>(n, 0.0)) == std::vector<double>(n, 0.0));
  SUBCASE("impulse against a constant") {
    std::vector<double> high(n, 0.0);
    high[10] = 1.0;
    const double c = 4.0;
    const auto out = ratio_feature(std::vector<double>(n, c), high);
    const std::size_t start = (2 * n - 1 - n) / 2;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t m = j + start;
      const bool covered = m >= 10 && m - 10 < n;
      CHECK(out[j] == (covered ? 1.0 / c : 0.0));
    }
  }
  SUBCASE("linear in the high band and regularised") {
    const auto low = oracle::noise(n, 1), high = oracle::noise(n, 2);
    auto scaled = high, neg = high;
    for (double& v : scaled) v *= 3.5;
    for (double& v : neg) v = -v;
    const auto a = ratio_feature(low, high), b = ratio_feature(low, scaled), c = ratio_feature(low, neg);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(b[j] == doctest::Approx(3.5 * a[j]).epsilon(1e-12));
      CHECK(c[j] == -a[j]);
    }
    const auto z = ratio_feature(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), 0.5);
    for (double v : z) CHECK(std::isfinite(v));
    CHECK(z[n / 2] == doctest::Approx(2.0 * n).epsilon(0.05));
  }
}

TEST_CASE("assembled tensors") {
  SUBCASE("identical ears give zero interaural channels") {
    const auto src = synth_speech(1.0, 120.0, 2);
    BinauralRecording r{src, src, {0, 0, 1, 0.18}, 0, 0};
    const auto x = assemble(r);
    CHECK(x.length() == 512);
    for (std::size_t c = 0; c < 4; ++c)
      for (double v : x.channels[c]) CHECK(v == 0.0);
  }
  SUBCASE("ipsilateral ear has the higher level") {
    const auto left = assemble(Scene(-60, 0).rec), right = assemble(Scene(60, 0).rec);
    double ml = 0, mr = 0;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 512; ++k) ml += left.channels[c][k], mr += right.channels[c][k];
    CHECK(ml > 0);
    CHECK(mr < 0);
  }
  SUBCASE("finite, bounded, split at the aliasing frequency") {
    const auto x = assemble(Scene(130, -20).rec);
    for (const auto& ch : x.channels)
      for (double v : ch) CHECK(std::isfinite(v));
    CHECK(x.split_bin == static_cast<std::size_t>(std::floor(952.7777 / x.bin_hz)) + 1);
    for (std::size_t c : {2u, 3u})
      for (double v : x.channels[c]) CHECK(std::fabs(v) <= 1.0 / (2.0 * x.bin_hz) + 1e-15);
  }
  SUBCASE("deterministic and source-gain invariant") {
    const auto a = assemble(Scene(20, 100).rec), b = assemble(Scene(20, 100).rec), c = assemble(Scene(20, 100, 10.0).rec);
    CHECK(a.channels == b.channels);
    for (std::size_t ch = 0; ch < 4; ++ch)
      for (std::size_t k = 0; k < 512; ++k) CHECK(std::fabs(a.channels[ch][k] - c.channels[ch][k]) < 1e-9);
  }
  SUBCASE("frame-average mode and energy-ratio mode") {
    FeatureConfig cfg;
    cfg.mode = FeatureMode::frame_average;
    cfg.ratio = RatioMode::energy_ratio;
    cfg.length = 128;
    const auto x = assemble(Scene(-45, 10).rec, cfg);
    CHECK(x.length() == 128);
    for (const auto& ch : x.channels)
      for (double v : ch) CHECK(std::isfinite(v));
  }
  SUBCASE("silence has no features") {
    const AudioBuffer z(std::vector<double>(4000, 0.0), 16000);
    try {
      assemble({z, z, {0, 0, 1, 0.18}, 0, 0});
      FAIL("expected empty features");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::empty_features);
    }
  }
}

TEST_CASE("feature batch container") {
  FeatureBatch b;
  b.length = 16;
  std::mt19937_64 g(4);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int i = 0; i < 7; ++i) {
    std::vector<float> x(5 * 16);
    for (auto& v : x) v = u(g);
    b.append(x, i * 10.0 - 30.0, -i * 7.5);
  }
  const auto path = (std::filesystem::temp_directory_path() / "binori_test.feat").string();
  write_batch(path, b);
  const auto c = read_batch(path);
  CHECK(c.length == 16);
  CHECK(c.labels == b.labels);
  CHECK(c.data == b.data);
  const std::size_t pick[] = {6, 1};
  const auto s = b.subset(pick);
  CHECK(s.count() == 2);
  CHECK(std::equal(s.sample(0).begin(), s.sample(0).end(), b.sample(6).begin()));
  CHECK_THROWS_AS(b.append(std::vector<float>(3), 0, 0), Error);
  std::filesystem::remove(path);
}
