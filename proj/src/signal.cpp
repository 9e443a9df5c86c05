#include "binori/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "binori/error.hpp"

namespace binori {

AudioBuffer::AudioBuffer(std::vector<double> samples, double sample_rate, int channels)
    : samples_(std::move(samples)), sample_rate_(sample_rate), channels_(channels) {
  require(sample_rate_ > 0.0 && std::isfinite(sample_rate_), ErrorCode::invalid_input,
          "sample rate must be positive");
  require(channels_ == 1 || channels_ == 2, ErrorCode::invalid_input,
          "channel count must be 1 or 2");
  require(samples_.size() % static_cast<std::size_t>(channels_) == 0,
          ErrorCode::invalid_input, "sample count not divisible by channel count");
  for (double v : samples_)
    require(std::isfinite(v), ErrorCode::invalid_input, "non-finite sample");
}

AudioBuffer AudioBuffer::channel(int index) const {
  require(index >= 0 && index < channels_, ErrorCode::invalid_input, "channel index out of range");
  if (channels_ == 1) return *this;
  std::vector<double> out(frames());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = samples_[i * 2 + index];
  return AudioBuffer(std::move(out), sample_rate_, 1);
}

AudioBuffer AudioBuffer::interleave(const AudioBuffer& left, const AudioBuffer& right) {
  require(left.channels() == 1 && right.channels() == 1, ErrorCode::invalid_input,
          "interleave expects mono inputs");
  require(left.frames() == right.frames() && left.sample_rate() == right.sample_rate(),
          ErrorCode::invalid_input, "interleave expects matching buffers");
  std::vector<double> out(left.frames() * 2);
  for (std::size_t i = 0; i < left.frames(); ++i) {
    out[2 * i] = left.samples_[i];
    out[2 * i + 1] = right.samples_[i];
  }
  return AudioBuffer(std::move(out), left.sample_rate(), 2);
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> make_window(Window w, std::size_t length) {
  std::vector<double> out(length, 1.0);
  const double n = static_cast<double>(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    switch (w) {
      case Window::rectangular: break;
      case Window::hann: out[i] = 0.5 - 0.5 * std::cos(phase); break;
      case Window::hamming: out[i] = 0.54 - 0.46 * std::cos(phase); break;
    }
  }
  return out;
}

namespace {

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

  Plans get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* re = fftw_alloc_real(n);
    fftw_complex* cx = fftw_alloc_complex(n / 2 + 1);
    Plans p;
    p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), re, cx, FFTW_ESTIMATE);
    p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), cx, re, FFTW_ESTIMATE);
    fftw_free(re);
    fftw_free(cx);
    plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, Plans> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

Spectrum fft(std::span<const double> x, double sample_rate) {
  require(x.size() >= 2, ErrorCode::invalid_input, "fft needs at least 2 samples");
  require(sample_rate > 0.0, ErrorCode::invalid_input, "sample rate must be positive");
  const std::size_t n = x.size();
  const Plans plans = plan_cache().get(n);
  std::unique_ptr<double, FftwFree> re(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> cx(fftw_alloc_complex(n / 2 + 1));
  std::copy(x.begin(), x.end(), re.get());
  fftw_execute_dft_r2c(plans.forward, re.get(), cx.get());

  Spectrum s;
  s.origin_length = n;
  s.bin_hz = sample_rate / static_cast<double>(n);
  s.bins.resize(n / 2 + 1);
  for (std::size_t k = 0; k < s.bins.size(); ++k) s.bins[k] = Complex(cx.get()[k][0], cx.get()[k][1]);
  return s;
}

Spectrum fft(const AudioBuffer& mono) {
  require(!mono.empty(), ErrorCode::invalid_input, "fft of empty buffer");
  require(mono.channels() == 1, ErrorCode::invalid_input, "fft expects a mono buffer");
  return fft(mono.samples(), mono.sample_rate());
}

std::vector<double> ifft_samples(const Spectrum& spec) {
  const std::size_t n = spec.origin_length;
  require(n >= 2 && spec.bins.size() == n / 2 + 1, ErrorCode::invalid_input,
          "spectrum bin count inconsistent with origin length");
  require(spec.bin_hz > 0.0, ErrorCode::invalid_input, "spectrum bin spacing must be positive");
  const Plans plans = plan_cache().get(n);
  std::unique_ptr<double, FftwFree> re(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> cx(fftw_alloc_complex(n / 2 + 1));
  for (std::size_t k = 0; k < spec.bins.size(); ++k) {
    cx.get()[k][0] = spec.bins[k].real();
    cx.get()[k][1] = spec.bins[k].imag();
  }
  // A real signal has real DC and Nyquist bins; c2r ignores their imaginary parts.
  fftw_execute_dft_c2r(plans.inverse, cx.get(), re.get());
  std::vector<double> out(re.get(), re.get() + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

AudioBuffer ifft(const Spectrum& spec) {
  auto samples = ifft_samples(spec);
  return AudioBuffer(std::move(samples), spec.sample_rate(), 1);
}

std::size_t frame_count(std::size_t length, std::size_t frame_len, std::size_t hop) {
  if (frame_len == 0 || hop == 0 || frame_len > length) return 0;
  return (length - frame_len) / hop + 1;
}

Stft stft(const AudioBuffer& mono, std::size_t frame_len, std::size_t hop, Window window) {
  require(mono.channels() == 1, ErrorCode::invalid_input, "stft expects a mono buffer");
  require(frame_len >= 2 && hop >= 1 && hop <= frame_len, ErrorCode::invalid_input,
          "stft needs 2 <= frame_len and 1 <= hop <= frame_len");
  require(frame_len <= mono.frames(), ErrorCode::invalid_input,
          "frame length exceeds buffer length");
  const auto w = make_window(window, frame_len);
  const auto x = mono.samples();
  Stft out;
  out.frame_len = frame_len;
  out.hop = hop;
  out.sample_rate = mono.sample_rate();
  const std::size_t count = frame_count(x.size(), frame_len, hop);
  out.frames.reserve(count);
  std::vector<double> seg(frame_len);
  for (std::size_t f = 0; f < count; ++f) {
    for (std::size_t i = 0; i < frame_len; ++i) seg[i] = x[f * hop + i] * w[i];
    out.frames.push_back(fft(seg, mono.sample_rate()));
  }
  return out;
}

AudioBuffer istft(const Stft& s, Window window) {
  require(!s.frames.empty(), ErrorCode::invalid_input, "istft of empty stft");
  require(s.hop >= 1 && s.hop <= s.frame_len, ErrorCode::invalid_input, "invalid stft hop");
  for (const auto& f : s.frames)
    require(f.origin_length == s.frame_len, ErrorCode::invalid_input,
            "stft frames disagree with frame length");
  const auto w = make_window(window, s.frame_len);
  const std::size_t length = (s.frames.size() - 1) * s.hop + s.frame_len;
  std::vector<double> acc(length, 0.0), norm(length, 0.0);
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    const auto seg = ifft_samples(s.frames[f]);
    for (std::size_t i = 0; i < s.frame_len; ++i) {
      acc[f * s.hop + i] += seg[i] * w[i];
      norm[f * s.hop + i] += w[i] * w[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i)
    acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  return AudioBuffer(std::move(acc), s.sample_rate, 1);
}

std::size_t next_fast_length(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace binori
