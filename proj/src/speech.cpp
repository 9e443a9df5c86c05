#include "binori/speech.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "binori/error.hpp"
#include "binori/random.hpp"

namespace binori {

namespace {

struct Formant {
  double freq;
  double bandwidth;
};

// Magnitude of a second-order resonance normalised to 1 at its peak.
double resonance(double f, const Formant& fm) {
  const double num = fm.bandwidth * fm.freq;
  const double d1 = fm.freq * fm.freq - f * f;
  return num / std::sqrt(d1 * d1 + fm.bandwidth * fm.bandwidth * f * f);
}

double raised_cosine(double x) { return 0.5 - 0.5 * std::cos(std::numbers::pi * std::clamp(x, 0.0, 1.0)); }

}  // namespace

AudioBuffer synth_speech(double duration_s, double f0_hz, std::uint64_t seed, const SpeechConfig& cfg) {
  require(duration_s > 0.0 && std::isfinite(duration_s), ErrorCode::invalid_input, "duration must be positive");
  require(f0_hz >= 80.0 && f0_hz <= 300.0, ErrorCode::invalid_input, "f0 must lie in [80, 300] Hz");
  require(cfg.sample_rate > 0.0, ErrorCode::invalid_input, "sample rate must be positive");

  const double fs = cfg.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  require(n >= 2, ErrorCode::invalid_input, "duration shorter than two samples");
  Rng rng(seed);

  const Formant formants[3] = {{rng.uniform(300.0, 800.0), rng.uniform(60.0, 120.0)},
                               {rng.uniform(900.0, 2300.0), rng.uniform(80.0, 160.0)},
                               {rng.uniform(2400.0, 3400.0), rng.uniform(120.0, 250.0)}};
  const double tilt = rng.uniform(0.6, 1.0);  // glottal roll-off exponent

  // Vowel occupies the middle of the word; noise segments sit at the edges.
  double t_on = rng.uniform(0.08, 0.15) * duration_s;
  double t_off = rng.uniform(0.85, 0.92) * duration_s;
  if (!cfg.unvoiced_segments) {
    t_on = 0.0;
    t_off = duration_s;
  }
  const double fade = std::min(cfg.unvoiced_segments ? 0.03 : 0.01, 0.25 * (t_off - t_on));

  const double top = std::min(cfg.max_harmonic_hz, 0.5 * fs * 0.98);
  const auto harmonics = static_cast<int>(std::floor(top / f0_hz));
  std::vector<double> amp(harmonics + 1), phase(harmonics + 1);
  for (int k = 1; k <= harmonics; ++k) {
    const double f = k * f0_hz;
    double env = 0.0;
    for (const auto& fm : formants) env += resonance(f, fm);
    amp[k] = env / std::pow(static_cast<double>(k), tilt) + 0.02;
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  std::vector<double> y(n, 0.0);
  const double w0 = 2.0 * std::numbers::pi * f0_hz / fs;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double env = raised_cosine((t - t_on) / fade) * raised_cosine((t_off - t) / fade);
    if (env <= 0.0) continue;
    double s = 0.0;
    const double wi = w0 * static_cast<double>(i);
    for (int k = 1; k <= harmonics; ++k) s += amp[k] * std::sin(wi * k + phase[k]);
    y[i] = env * s;
  }

  if (cfg.unvoiced_segments) {
    double voiced_power = 0.0;
    for (double v : y) voiced_power += v * v;
    const double level = std::sqrt(voiced_power / static_cast<double>(n)) * 0.3;
    const double gap = 0.01;
    const double segments[2][2] = {{std::max(0.0, t_on - 0.06 * duration_s), t_on - gap},
                                   {t_off + gap, std::min(duration_s, t_off + 0.05 * duration_s)}};
    double prev = 0.0;
    for (const auto& seg : segments) {
      const double len = seg[1] - seg[0];
      if (len <= 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        if (t < seg[0] || t >= seg[1]) continue;
        const double env = std::sin(std::numbers::pi * (t - seg[0]) / len);
        // First difference tilts the noise towards high frequencies.
        const double g = rng.normal();
        y[i] += level * env * (g - 0.7 * prev);
        prev = g;
      }
    }
  }

  const double r = rms(y);
  require(r > 0.0, ErrorCode::invalid_input, "duration too short for a voiced segment");
  for (double& v : y) v /= r;
  return AudioBuffer(std::move(y), fs, 1);
}

std::vector<AudioBuffer> load_source_directory(const std::string& dir, double sample_rate) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorCode::io, dir + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<AudioBuffer> out;
  for (const auto& p : files) {
    AudioBuffer b = read_wav(p.string());
    require(b.sample_rate() == sample_rate, ErrorCode::invalid_input,
            p.string() + ": unexpected sample rate");
    if (b.channels() == 1) {
      out.push_back(std::move(b));
      continue;
    }
    std::vector<double> mono(b.frames(), 0.0);
    for (std::size_t i = 0; i < b.frames(); ++i) {
      for (int c = 0; c < b.channels(); ++c) mono[i] += b.samples()[i * b.channels() + c];
      mono[i] /= b.channels();
    }
    out.emplace_back(std::move(mono), sample_rate, 1);
  }
  require(!out.empty(), ErrorCode::invalid_input, dir + ": no wav files");
  return out;
}

}  // namespace binori
