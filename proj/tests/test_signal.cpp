#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"

#include "binori/error.hpp"
#include "binori/signal.hpp"

using namespace binori;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("fft of a unit impulse is flat") {
  const auto s = fft(AudioBuffer({1, 0, 0, 0}, 16000));
  REQUIRE(s.bins.size() == 3);
  for (auto b : s.bins) {
    CHECK(b.real() == doctest::Approx(1.0));
    CHECK(std::abs(b.imag()) < 1e-15);
  }
  CHECK(s.bin_hz == doctest::Approx(4000.0));
  CHECK(s.origin_length == 4);
}

TEST_CASE("fft of a cosine concentrates in its bin") {
  const std::size_t n = 256, k = 17;
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(2 * std::numbers::pi * k * t / n);
  const auto s = fft(x, 16000);
  const double peak = std::abs(s.bins[k]);
  for (std::size_t i = 0; i < s.bins.size(); ++i)
    if (i != k) CHECK(std::abs(s.bins[i]) < 1e-9 * peak);
}

TEST_CASE("fft matches direct summation and Parseval") {
  for (std::size_t n : {1024u, 1000u, 17u}) {
    const auto x = oracle::noise(n, 7 + n);
    const auto s = fft(x, 16000);
    const auto ref = oracle::dft(x);
    REQUIRE(s.bins.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(s.bins[k] - ref[k]) < 1e-9 * std::sqrt(n));
    long double time = 0, freq = 0;
    for (double v : x) time += v * v;
    for (std::size_t k = 0; k < s.bins.size(); ++k) {
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      freq += (edge ? 1.0L : 2.0L) * std::norm(s.bins[k]);
    }
    freq /= n;
    CHECK(std::fabs(static_cast<double>((time - freq) / time)) < 1e-9);
  }
}

TEST_CASE("fft is linear") {
  const auto x = oracle::noise(512, 1), y = oracle::noise(512, 2);
  std::vector<double> z(512);
  for (std::size_t i = 0; i < 512; ++i) z[i] = 2.5 * x[i] - 0.75 * y[i];
  const auto fx = fft(x, 16000), fy = fft(y, 16000), fz = fft(z, 16000);
  for (std::size_t k = 0; k < fz.bins.size(); ++k)
    CHECK(std::abs(fz.bins[k] - (2.5 * fx.bins[k] - 0.75 * fy.bins[k])) < 1e-9);
}

TEST_CASE("ifft inverts fft") {
  SUBCASE("flat spectrum gives an impulse") {
    Spectrum s{{1, 1, 1}, 4000, 4};
    const auto x = ifft_samples(s);
    CHECK(oracle::max_abs_diff(x, {1, 0, 0, 0}) < 1e-15);
  }
  SUBCASE("zero spectrum gives silence") {
    Spectrum s{std::vector<Complex>(9), 1000, 16};
    for (double v : ifft_samples(s)) CHECK(v == 0.0);
  }
  SUBCASE("round trip on noise") {
    for (std::size_t n : {4096u, 65536u, 4095u}) {
      const auto x = oracle::noise(n, 3);
      CHECK(oracle::max_abs_diff(to_vec(ifft(fft(x, 16000)).samples()), x) < 1e-9);
    }
  }
}

TEST_CASE("fft and ifft reject bad input") {
  CHECK_THROWS_AS(fft(AudioBuffer({}, 16000)), Error);
  CHECK_THROWS_AS(fft(AudioBuffer({1, 2, 3, 4}, 16000, 2)), Error);
  Spectrum bad{{1, 1}, 4000, 4};
  CHECK_THROWS_AS(ifft(bad), Error);
}

TEST_CASE("stft framing") {
  const auto x = oracle::noise(16000, 4);
  CHECK(frame_count(16000, 512, 256) == 61);
  const auto s = stft(AudioBuffer(x, 16000));
  CHECK(s.frames.size() == 61);
  CHECK_THROWS_AS(stft(AudioBuffer(oracle::noise(100, 1), 16000), 512, 256), Error);
}

TEST_CASE("stft frames are transforms of windowed segments") {
  const auto x = oracle::noise(2048, 5);
  const auto s = stft(AudioBuffer(x, 16000), 256, 128, Window::hann);
  const auto w = make_window(Window::hann, 256);
  std::vector<double> seg(256);
  for (std::size_t i = 0; i < 256; ++i) seg[i] = x[3 * 128 + i] * w[i];
  const auto ref = oracle::dft(seg);
  for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(s.frames[3].bins[k] - ref[k]) < 1e-9);
}

TEST_CASE("constant signal gives identical rectangular frames") {
  const auto s = stft(AudioBuffer(std::vector<double>(4096, 0.3), 16000), 512, 512, Window::rectangular);
  for (const auto& f : s.frames) CHECK(f.bins == s.frames.front().bins);
}

TEST_CASE("istft reconstructs interior samples") {
  const auto x = oracle::noise(16000, 6);
  const auto y = istft(stft(AudioBuffer(x, 16000), 512, 256, Window::hann), Window::hann);
  CHECK(oracle::max_abs_diff(to_vec(y.samples()), x, 512, 16000 - 512) < 1e-6);
  CHECK_THROWS_AS(istft(Stft{}), Error);
}

TEST_CASE("wav round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto x = oracle::noise(1000, 8, 0.2);
  const AudioBuffer buf(x, 16000);
  const auto fpath = (dir / "binori_test_f32.wav").string();
  write_wav(fpath, buf, WavFormat::float32);
  const auto y = read_wav(fpath);
  CHECK(y.sample_rate() == 16000);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.samples()[i] == static_cast<double>(static_cast<float>(x[i])));
  const auto ipath = (dir / "binori_test_i16.wav").string();
  write_wav(ipath, buf, WavFormat::pcm16);
  CHECK(oracle::max_abs_diff(to_vec(read_wav(ipath).samples()), x) < 1.0 / 32767);
  std::filesystem::remove(fpath);
  std::filesystem::remove(ipath);
}

TEST_CASE("audio buffers reject invalid samples") {
  CHECK_THROWS_AS(AudioBuffer({1, 2, 3}, 16000, 2), Error);
  CHECK_THROWS_AS(AudioBuffer({1, NAN}, 16000), Error);
  CHECK_THROWS_AS(AudioBuffer({1, 2}, 0), Error);
}
