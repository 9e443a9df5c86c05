#include <cmath>

#include "doctest.h"

#include "binori/preprocess.hpp"
#include "binori/speech.hpp"

using namespace binori;

TEST_CASE("voiced synthetic speech is detected as voiced") {
  SpeechConfig cfg;
  cfg.unvoiced_segments = false;
  const auto x = synth_speech(1.0, 150.0, 3, cfg);
  CHECK(rms(x.samples()) == doctest::Approx(1.0).epsilon(1e-12));
  const auto d = detect_voicing(x);
  std::size_t voiced = 0;
  for (double p : d.probability) voiced += p > 0.5;
  CHECK(static_cast<double>(voiced) > 0.9 * d.probability.size());
}

TEST_CASE("synthetic speech has harmonic peaks") {
  SpeechConfig cfg;
  cfg.unvoiced_segments = false;
  for (double f0 : {110.0, 150.0, 237.0}) {
    const auto s = fft(synth_speech(1.0, f0, 8, cfg));
    for (int k = 1; k <= 10; ++k) {
      const double target = k * f0 / s.bin_hz;
      const auto c = static_cast<std::size_t>(std::lround(target));
      std::size_t best = c - 4;
      for (std::size_t j = c - 4; j <= c + 4; ++j)
        if (std::abs(s.bins[j]) > std::abs(s.bins[best])) best = j;
      CHECK(std::fabs(static_cast<double>(best) - target) <= 1.0);
    }
  }
}

TEST_CASE("synthetic speech is reproducible and validated") {
  const auto a = synth_speech(0.5, 180.0, 42);
  const auto b = synth_speech(0.5, 180.0, 42);
  CHECK(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin()));
  CHECK(a.frames() == 8000);
  CHECK_THROWS(synth_speech(1.0, 50.0, 1));
  CHECK_THROWS(synth_speech(0.0, 150.0, 1));
}
