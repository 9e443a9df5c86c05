#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace binori {

using Complex = std::complex<double>;

inline constexpr double kDefaultSampleRate = 16000.0;

/// Uniformly sampled waveform, interleaved when stereo.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  /// Throws invalid_input unless sample_rate > 0, channels is 1 or 2, the
  /// sample count is divisible by channels and every sample is finite.
  AudioBuffer(std::vector<double> samples, double sample_rate, int channels = 1);

  std::span<const double> samples() const { return samples_; }
  double sample_rate() const { return sample_rate_; }
  int channels() const { return channels_; }
  std::size_t frames() const { return channels_ ? samples_.size() / channels_ : 0; }
  bool empty() const { return samples_.empty(); }

  /// Deinterleaved copy of one channel as a mono buffer.
  AudioBuffer channel(int index) const;
  static AudioBuffer interleave(const AudioBuffer& left, const AudioBuffer& right);

 private:
  std::vector<double> samples_;
  double sample_rate_ = kDefaultSampleRate;
  int channels_ = 1;
};

double rms(std::span<const double> x);

/// One-sided transform of a real signal: bins.size() == origin_length / 2 + 1.
struct Spectrum {
  std::vector<Complex> bins;
  double bin_hz = 0.0;
  std::size_t origin_length = 0;

  double sample_rate() const { return bin_hz * static_cast<double>(origin_length); }
  double frequency(std::size_t k) const { return bin_hz * static_cast<double>(k); }
};

enum class Window { rectangular, hann, hamming };

/// Periodic window of the given length.
std::vector<double> make_window(Window w, std::size_t length);

struct Stft {
  std::vector<Spectrum> frames;
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  double sample_rate = kDefaultSampleRate;
};

inline constexpr std::size_t kDefaultFrameLen = 512;
inline constexpr std::size_t kDefaultHop = 256;

Spectrum fft(const AudioBuffer& mono);
Spectrum fft(std::span<const double> x, double sample_rate);
AudioBuffer ifft(const Spectrum& spec);
/// Raw inverse; same checks as ifft without wrapping the result.
std::vector<double> ifft_samples(const Spectrum& spec);

/// Number of frames stft() produces: floor((length - frame_len) / hop) + 1.
std::size_t frame_count(std::size_t length, std::size_t frame_len, std::size_t hop);

Stft stft(const AudioBuffer& mono, std::size_t frame_len = kDefaultFrameLen,
          std::size_t hop = kDefaultHop, Window window = Window::hann);
/// Weighted overlap-add with the analysis window reused for synthesis and
/// normalisation by the summed squared window, so any window/hop pair whose
/// squared-window sum is nonzero reconstructs the covered samples.
AudioBuffer istft(const Stft& s, Window window = Window::hann);

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
std::size_t next_fast_length(std::size_t n);

enum class WavFormat { pcm16, float32 };

AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& buf,
               WavFormat format = WavFormat::float32);

}  // namespace binori
