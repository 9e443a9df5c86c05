#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "binori/renderer.hpp"
#include "binori/signal.hpp"

namespace binori {

struct VoicingConfig {
  std::size_t frame_len = 1024;  // 64 ms at 16 kHz: resolves harmonics down to 50 Hz
  std::size_t hop = 256;
  double min_pitch_hz = 50.0;
  double max_pitch_hz = 450.0;
  double max_harmonic_hz = 4000.0;
  int candidates_per_octave = 48;
  double octave_tolerance = 0.85;  // fraction of the best score a lower pitch peak needs
  // voiced probability = logistic(gain * (comb contrast - bias)), contrast in nepers
  double logistic_gain = 2.0;
  double logistic_bias = 4.5;
  // log-spectrum floor relative to the frame's mean power
  double relative_floor = 1e-6;
};

struct VoicingDecision {
  std::vector<double> probability;               // per frame, [0, 1]
  std::vector<std::optional<double>> pitch_hz;   // per frame, [50, 450] when present
  std::size_t frame_len = 0;
  std::size_t hop = 0;
};

/// Harmonic-summation voicing detector. For each frame and each log-spaced
/// pitch candidate the mean log power at the harmonics is compared with the
/// mean log power halfway between them; the best candidate's contrast goes
/// through a logistic to give the voiced probability. Silent frames score 0.
VoicingDecision detect_voicing(const AudioBuffer& mono, const VoicingConfig& cfg = {});

/// Zeroes unvoiced frames (probability < threshold) in both ears with one
/// shared gain curve. Each frame owns the hop-long span around its centre;
/// voiced spans that border a masked span fade in/out over a raised-cosine
/// ramp of ramp_ms that lies entirely inside the voiced span.
BinauralRecording mask_unvoiced(const BinauralRecording& rec, const VoicingDecision& decision,
                                double threshold = 0.5, double ramp_ms = 5.0);

/// Per-sample gain that mask_unvoiced applies.
std::vector<double> voicing_gain(std::size_t length, double sample_rate,
                                 const VoicingDecision& decision, double threshold,
                                 double ramp_ms = 5.0);

struct FloorConfig {
  double factor = 1.0;
  /// 0 = one threshold from the mean energy of the whole spectrum; otherwise
  /// each bin's threshold is the mean energy over a centred window this wide.
  double window_hz = 0.0;
};

/// Per-bin threshold (factor * mean energy) for a list of bin energies.
std::vector<double> floor_threshold(std::span<const double> energy, double bin_hz,
                                    const FloorConfig& cfg);

/// Zeroes bins whose energy lies below the threshold; other bins unchanged.
Spectrum spectral_floor_mask(const Spectrum& spec, const FloorConfig& cfg = {});
Spectrum apply_floor(const Spectrum& spec, std::span<const double> threshold);

/// Interaural-consistent variant: the threshold comes from the mean of the
/// two ears' energies and a bin is kept or zeroed in both ears together.
std::pair<Spectrum, Spectrum> spectral_floor_mask(const Spectrum& left, const Spectrum& right,
                                                  const FloorConfig& cfg = {});

struct PreprocessConfig {
  VoicingConfig voicing;
  double voicing_threshold = 0.5;
  double ramp_ms = 5.0;
};

/// Voicing detection on the ear average followed by mask_unvoiced.
BinauralRecording preprocess(const BinauralRecording& rec, const PreprocessConfig& cfg = {});

}  // namespace binori
