#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binori/signal.hpp"

namespace binori {

struct SpeechConfig {
  double sample_rate = kDefaultSampleRate;
  bool unvoiced_segments = true;  // fricative-like noise at the word edges
  double max_harmonic_hz = 7800.0;
};

/// Synthetic one-word utterance: a constant-pitch harmonic glottal source
/// shaped by three seeded formant resonances under a syllable envelope,
/// optionally with noise segments before and after the vowel. Unit RMS.
AudioBuffer synth_speech(double duration_s, double f0_hz, std::uint64_t seed,
                         const SpeechConfig& cfg = {});

/// Loads every "*.wav" in a directory (sorted by name) as a mono source at
/// the expected sample rate; stereo files are averaged to mono.
std::vector<AudioBuffer> load_source_directory(const std::string& dir,
                                               double sample_rate = kDefaultSampleRate);

}  // namespace binori
