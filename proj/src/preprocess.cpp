#include "binori/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binori/error.hpp"

namespace binori {

namespace {

// Linear interpolation of a per-bin sequence at a fractional bin position.
double interp(std::span<const double> v, double pos) {
  if (pos <= 0.0) return v.front();
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * v[i] + t * v[i + 1];
}

}  // namespace

VoicingDecision detect_voicing(const AudioBuffer& mono, const VoicingConfig& cfg) {
  require(mono.channels() == 1, ErrorCode::invalid_input, "detect_voicing expects a mono buffer");
  require(mono.frames() >= cfg.frame_len, ErrorCode::invalid_input,
          "buffer shorter than one voicing frame");
  require(cfg.min_pitch_hz > 0.0 && cfg.max_pitch_hz > cfg.min_pitch_hz &&
              cfg.candidates_per_octave > 0,
          ErrorCode::invalid_input, "invalid pitch search range");

  const Stft s = stft(mono, cfg.frame_len, cfg.hop, Window::hann);
  const double bin_hz = mono.sample_rate() / static_cast<double>(cfg.frame_len);
  const double top_hz = std::min(cfg.max_harmonic_hz, 0.95 * mono.sample_rate() / 2.0);

  std::vector<double> candidates;
  const double octaves = std::log2(cfg.max_pitch_hz / cfg.min_pitch_hz);
  const int steps = static_cast<int>(std::floor(octaves * cfg.candidates_per_octave));
  for (int i = 0; i <= steps; ++i)
    candidates.push_back(cfg.min_pitch_hz * std::exp2(static_cast<double>(i) / cfg.candidates_per_octave));

  VoicingDecision out;
  out.frame_len = cfg.frame_len;
  out.hop = cfg.hop;
  out.probability.resize(s.frames.size(), 0.0);
  out.pitch_hz.resize(s.frames.size());

  std::vector<double> logp;
  std::vector<double> score(candidates.size());
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    const auto& bins = s.frames[f].bins;
    double mean = 0.0;
    for (const auto& b : bins) mean += std::norm(b);
    mean /= static_cast<double>(bins.size());
    if (!(mean > 0.0)) continue;

    logp.resize(bins.size());
    const double floor = cfg.relative_floor * mean;
    for (std::size_t k = 0; k < bins.size(); ++k) logp[k] = std::log(std::norm(bins[k]) + floor);

    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double f0 = candidates[c];
      const auto harmonics = static_cast<std::size_t>(std::floor(top_hz / f0));
      if (harmonics < 2) {
        score[c] = -1e9;
        continue;
      }
      double peaks = 0.0, valleys = 0.0;
      for (std::size_t h = 1; h <= harmonics; ++h) {
        peaks += interp(logp, static_cast<double>(h) * f0 / bin_hz);
        valleys += interp(logp, (static_cast<double>(h) - 0.5) * f0 / bin_hz);
      }
      score[c] = (peaks - valleys) / static_cast<double>(harmonics);
    }
    const auto top = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
    const double contrast = score[top];
    // Lowest local peak within octave_tolerance of the best score.
    std::size_t best = top;
    for (std::size_t c = 0; contrast > 0.0 && c < top; ++c) {
      const bool peak = (c == 0 || score[c] >= score[c - 1]) && score[c] >= score[c + 1];
      if (peak && score[c] >= cfg.octave_tolerance * contrast) {
        best = c;
        break;
      }
    }
    const double p = 1.0 / (1.0 + std::exp(-cfg.logistic_gain * (contrast - cfg.logistic_bias)));
    out.probability[f] = p;
    if (p >= 0.5) {
      // Parabolic refinement on the log-frequency candidate grid.
      double offset = 0.0;
      if (best > 0 && best + 1 < candidates.size()) {
        const double a = score[best - 1], b = score[best], c = score[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
      }
      const double pitch =
          candidates[best] * std::exp2(offset / static_cast<double>(cfg.candidates_per_octave));
      out.pitch_hz[f] = std::clamp(pitch, cfg.min_pitch_hz, cfg.max_pitch_hz);
    }
  }
  return out;
}

std::vector<double> voicing_gain(std::size_t length, double sample_rate,
                                 const VoicingDecision& decision, double threshold, double ramp_ms) {
  const std::size_t frames = decision.probability.size();
  require(frames > 0 && decision.hop > 0 && decision.hop <= decision.frame_len,
          ErrorCode::invalid_input, "empty or malformed voicing decision");
  require(frame_count(length, decision.frame_len, decision.hop) == frames, ErrorCode::invalid_input,
          "voicing frame grid does not match the recording length");

  const std::size_t lead = (decision.frame_len - decision.hop) / 2;
  std::vector<double> gain(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t f = i < lead ? 0 : std::min((i - lead) / decision.hop, frames - 1);
    gain[i] = decision.probability[f] >= threshold ? 1.0 : 0.0;
  }

  const auto ramp = static_cast<std::size_t>(std::lround(ramp_ms * sample_rate / 1000.0));
  if (ramp == 0) return gain;
  std::size_t i = 0;
  while (i < length) {
    if (gain[i] == 0.0) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < length && gain[end] != 0.0) ++end;
    const std::size_t run = end - i;
    const std::size_t r = std::min(ramp, run / 2);
    for (std::size_t j = 0; j < r; ++j) {
      const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(j) + 0.5) /
                                            static_cast<double>(r));
      if (i > 0) gain[i + j] = g;
      if (end < length) gain[end - 1 - j] = std::min(gain[end - 1 - j], g);
    }
    i = end;
  }
  return gain;
}

BinauralRecording mask_unvoiced(const BinauralRecording& rec, const VoicingDecision& decision,
                                double threshold, double ramp_ms) {
  require(rec.left.frames() == rec.right.frames(), ErrorCode::invalid_input,
          "left and right ears differ in length");
  const auto gain = voicing_gain(rec.left.frames(), rec.left.sample_rate(), decision, threshold, ramp_ms);
  std::vector<double> l(rec.left.samples().begin(), rec.left.samples().end());
  std::vector<double> r(rec.right.samples().begin(), rec.right.samples().end());
  for (std::size_t i = 0; i < gain.size(); ++i) {
    l[i] *= gain[i];
    r[i] *= gain[i];
  }
  BinauralRecording out = rec;
  out.left = AudioBuffer(std::move(l), rec.left.sample_rate(), 1);
  out.right = AudioBuffer(std::move(r), rec.right.sample_rate(), 1);
  return out;
}

std::vector<double> floor_threshold(std::span<const double> energy, double bin_hz, const FloorConfig& cfg) {
  const std::size_t n = energy.size();
  std::vector<double> thr(n, 0.0);
  if (n == 0) return thr;
  if (cfg.window_hz <= 0.0) {
    double sum = 0.0;
    for (double e : energy) sum += e;
    std::fill(thr.begin(), thr.end(), cfg.factor * (sum / static_cast<double>(n)));
    return thr;
  }
  const auto half = static_cast<std::size_t>(std::max(0.0, std::round(cfg.window_hz / bin_hz / 2.0)));
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + energy[k];
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k > half ? k - half : 0;
    const std::size_t hi = std::min(n, k + half + 1);
    thr[k] = cfg.factor * (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return thr;
}

Spectrum apply_floor(const Spectrum& spec, std::span<const double> threshold) {
  require(threshold.size() == spec.bins.size(), ErrorCode::invalid_input, "threshold length mismatch");
  Spectrum out = spec;
  for (std::size_t k = 0; k < out.bins.size(); ++k)
    if (std::norm(out.bins[k]) < threshold[k]) out.bins[k] = Complex(0.0, 0.0);
  return out;
}

Spectrum spectral_floor_mask(const Spectrum& spec, const FloorConfig& cfg) {
  std::vector<double> energy(spec.bins.size());
  for (std::size_t k = 0; k < energy.size(); ++k) energy[k] = std::norm(spec.bins[k]);
  return apply_floor(spec, floor_threshold(energy, spec.bin_hz, cfg));
}

std::pair<Spectrum, Spectrum> spectral_floor_mask(const Spectrum& left, const Spectrum& right,
                                                  const FloorConfig& cfg) {
  require(left.bins.size() == right.bins.size(), ErrorCode::invalid_input, "spectra differ in length");
  std::vector<double> energy(left.bins.size());
  for (std::size_t k = 0; k < energy.size(); ++k)
    energy[k] = 0.5 * (std::norm(left.bins[k]) + std::norm(right.bins[k]));
  const auto thr = floor_threshold(energy, left.bin_hz, cfg);
  Spectrum l = left, r = right;
  for (std::size_t k = 0; k < energy.size(); ++k)
    if (energy[k] < thr[k]) {
      l.bins[k] = Complex(0.0, 0.0);
      r.bins[k] = Complex(0.0, 0.0);
    }
  return {std::move(l), std::move(r)};
}

BinauralRecording preprocess(const BinauralRecording& rec, const PreprocessConfig& cfg) {
  require(rec.left.frames() == rec.right.frames(), ErrorCode::invalid_input,
          "left and right ears differ in length");
  std::vector<double> mix(rec.left.frames());
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix[i] = 0.5 * (rec.left.samples()[i] + rec.right.samples()[i]);
  const auto decision = detect_voicing(AudioBuffer(std::move(mix), rec.left.sample_rate(), 1), cfg.voicing);
  return mask_unvoiced(rec, decision, cfg.voicing_threshold, cfg.ramp_ms);
}

}  // namespace binori
