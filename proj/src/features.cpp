#include "binori/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binio.hpp"
#include "binori/error.hpp"

namespace binori {

namespace {

void check_pair(const Spectrum& yl, const Spectrum& yr) {
  require(yl.bins.size() == yr.bins.size(), ErrorCode::invalid_input, "ear spectra differ in length");
}

bool is_zero(const Complex& c) { return c.real() == 0.0 && c.imag() == 0.0; }

}  // namespace

std::vector<bool> valid_bins(const Spectrum& yl, const Spectrum& yr) {
  check_pair(yl, yr);
  std::vector<bool> v(yl.bins.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = !(is_zero(yl.bins[k]) && is_zero(yr.bins[k]));
  return v;
}

std::vector<double> ild(const Spectrum& yl, const Spectrum& yr) {
  check_pair(yl, yr);
  std::vector<double> out(yl.bins.size(), 0.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (is_zero(yl.bins[k]) && is_zero(yr.bins[k])) continue;
    const double d = 20.0 * (std::log10(std::abs(yl.bins[k])) - std::log10(std::abs(yr.bins[k])));
    out[k] = std::clamp(d, -60.0, 60.0);
  }
  return out;
}

std::vector<double> itd(const Spectrum& yl, const Spectrum& yr) {
  check_pair(yl, yr);
  std::vector<double> out(yl.bins.size(), 0.0);
  for (std::size_t k = 1; k < out.size(); ++k) {
    const Complex& l = yl.bins[k];
    const Complex& r = yr.bins[k];
    if (is_zero(l) && is_zero(r)) continue;
    // Y_l conj(Y_r), expanded.
    const double re = l.real() * r.real() + l.imag() * r.imag();
    const double im = l.imag() * r.real() - l.real() * r.imag();
    const double phase = std::copysign(std::atan2(std::fabs(im), re), im);
    const double f = yl.frequency(k);
    out[k] = (phase / std::numbers::pi) * (1.0 / (2.0 * f));
  }
  return out;
}

double aliasing_frequency(double h_m, double c_mps) {
  require(h_m > 0.0 && c_mps > 0.0, ErrorCode::invalid_input, "head width and speed of sound must be positive");
  return c_mps / (2.0 * h_m);
}

std::size_t split_index(std::size_t bins, double bin_hz, double f_split) {
  require(bins > 0 && bin_hz > 0.0, ErrorCode::invalid_input, "empty spectrum");
  const double top = bin_hz * static_cast<double>(bins - 1);
  require(f_split >= 0.0 && f_split <= top * (1.0 + 1e-12), ErrorCode::invalid_input,
          "split frequency outside the spectrum");
  const auto low = static_cast<std::size_t>(std::floor(f_split / bin_hz * (1.0 + 1e-12))) + 1;
  return std::min(low, bins);
}

BandSplit split_bands(const std::vector<double>& vec, double bin_hz, double f_split) {
  const std::size_t cut = split_index(vec.size(), bin_hz, f_split);
  return {std::vector<double>(vec.begin(), vec.begin() + static_cast<std::ptrdiff_t>(cut)),
          std::vector<double>(vec.begin() + static_cast<std::ptrdiff_t>(cut), vec.end())};
}

std::vector<double> resample_channel(std::span<const double> values, const std::vector<bool>& valid,
                                     std::size_t length) {
  require(valid.size() == values.size(), ErrorCode::invalid_input, "validity mask length mismatch");
  std::vector<double> out(length, 0.0);
  const std::size_t n = values.size();
  if (n == 0 || length == 0) return out;
  std::vector<bool> filled(length, false);
  const double step = static_cast<double>(n) / static_cast<double>(length);
  for (std::size_t j = 0; j < length; ++j) {
    const double a = static_cast<double>(j) * step;
    const double b = static_cast<double>(j + 1) * step;
    const auto first = static_cast<std::size_t>(std::floor(a));
    const auto last = std::min(n, static_cast<std::size_t>(std::ceil(b)));
    double acc = 0.0, weight = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      if (!valid[i]) continue;
      const double w = std::min(b, static_cast<double>(i + 1)) - std::max(a, static_cast<double>(i));
      if (w <= 0.0) continue;
      acc += w * values[i];
      weight += w;
    }
    if (weight > 0.0) {
      out[j] = acc / weight;
      filled[j] = true;
    }
  }
  // Points without valid input: linear between the nearest filled points,
  // held constant beyond the first and last.
  std::size_t prev = length;
  for (std::size_t j = 0; j < length; ++j) {
    if (!filled[j]) continue;
    if (prev == length) {
      for (std::size_t m = 0; m < j; ++m) out[m] = out[j];
    } else {
      for (std::size_t m = prev + 1; m < j; ++m) {
        const double t = static_cast<double>(m - prev) / static_cast<double>(j - prev);
        out[m] = (1.0 - t) * out[prev] + t * out[j];
      }
    }
    prev = j;
  }
  if (prev != length)
    for (std::size_t m = prev + 1; m < length; ++m) out[m] = out[prev];
  return out;
}

std::vector<double> ratio_feature(const std::vector<double>& ild_low, const std::vector<double>& ild_high,
                                  double epsilon_db) {
  const std::size_t nl = ild_low.size(), nh = ild_high.size();
  std::vector<double> out(nh, 0.0);
  if (nl == 0 || nh == 0) return out;
  std::vector<double> inv(nl);
  for (std::size_t i = 0; i < nl; ++i) {
    const double x = ild_low[i];
    const double reg = std::copysign(std::max(std::fabs(x), epsilon_db), x < 0.0 ? -1.0 : 1.0);
    inv[i] = 1.0 / reg;
  }
  // full[m] = sum_i high[i] inv[m - i], m in [0, nh + nl - 1); keep the centre nh.
  const std::size_t full_len = nh + nl - 1;
  const std::size_t start = (full_len - nh) / 2;
  for (std::size_t j = 0; j < nh; ++j) {
    const std::size_t m = j + start;
    const std::size_t i_lo = m >= nl - 1 ? m - (nl - 1) : 0;
    const std::size_t i_hi = std::min(nh - 1, m);
    double acc = 0.0;
    for (std::size_t i = i_lo; i <= i_hi; ++i) acc += ild_high[i] * inv[m - i];
    out[j] = acc;
  }
  return out;
}

std::vector<double> energy_ratio_feature(const std::vector<double>& ild_low,
                                         const std::vector<double>& ild_high) {
  double mean = 0.0;
  for (double v : ild_low) mean += v;
  if (!ild_low.empty()) mean /= static_cast<double>(ild_low.size());
  std::vector<double> out(ild_high.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ild_high[i] - mean;
  return out;
}

namespace {

struct PerBin {
  std::vector<double> ild, itd;
  std::vector<bool> ild_valid, itd_valid;
  double bin_hz = 0.0;
};

PerBin whole_utterance(const BinauralRecording& rec, const FeatureConfig& cfg) {
  auto [yl, yr] = spectral_floor_mask(fft(rec.left), fft(rec.right), cfg.floor);
  PerBin p;
  p.bin_hz = yl.bin_hz;
  p.ild = ild(yl, yr);
  p.itd = itd(yl, yr);
  p.ild_valid = valid_bins(yl, yr);
  p.itd_valid = p.ild_valid;
  p.itd_valid[0] = false;
  return p;
}

PerBin frame_average(const BinauralRecording& rec, const FeatureConfig& cfg) {
  const Stft sl = stft(rec.left, cfg.frame_len, cfg.hop, Window::hann);
  const Stft sr = stft(rec.right, cfg.frame_len, cfg.hop, Window::hann);
  const std::size_t bins = cfg.frame_len / 2 + 1;
  std::vector<double> ild_sum(bins, 0.0), itd_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t f = 0; f < sl.frames.size(); ++f) {
    auto [yl, yr] = spectral_floor_mask(sl.frames[f], sr.frames[f], cfg.floor);
    const auto v = valid_bins(yl, yr);
    const auto a = ild(yl, yr);
    const auto t = itd(yl, yr);
    for (std::size_t k = 0; k < bins; ++k)
      if (v[k]) {
        ild_sum[k] += a[k];
        itd_sum[k] += t[k];
        ++count[k];
      }
  }
  PerBin p;
  p.bin_hz = rec.left.sample_rate() / static_cast<double>(cfg.frame_len);
  p.ild.resize(bins);
  p.itd.resize(bins);
  p.ild_valid.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    p.ild_valid[k] = count[k] > 0;
    p.ild[k] = count[k] ? ild_sum[k] / static_cast<double>(count[k]) : 0.0;
    p.itd[k] = count[k] ? itd_sum[k] / static_cast<double>(count[k]) : 0.0;
  }
  p.itd_valid = p.ild_valid;
  p.itd_valid[0] = false;
  return p;
}

}  // namespace

FeatureTensor assemble(const BinauralRecording& rec, const FeatureConfig& cfg) {
  require(rec.left.channels() == 1 && rec.right.channels() == 1 &&
              rec.left.frames() == rec.right.frames() && rec.left.frames() >= 2,
          ErrorCode::invalid_input, "assemble expects two mono ears of equal length");
  require(cfg.length > 0, ErrorCode::invalid_input, "feature length must be positive");

  const PerBin p = cfg.mode == FeatureMode::whole_utterance ? whole_utterance(rec, cfg)
                                                            : frame_average(rec, cfg);
  require(std::any_of(p.ild_valid.begin(), p.ild_valid.end(), [](bool b) { return b; }),
          ErrorCode::empty_features, "recording has no nonzero spectral bins");

  const std::size_t n = p.ild.size();
  const double nyquist = p.bin_hz * static_cast<double>(n - 1);
  const double f_split = std::min(aliasing_frequency(rec.geometry.h_m, cfg.speed_of_sound_mps), nyquist);
  const std::size_t cut = split_index(n, p.bin_hz, f_split);

  auto band = [&](const std::vector<double>& v, const std::vector<bool>& valid, bool high) {
    const std::size_t b = high ? cut : 0, e = high ? n : cut;
    std::vector<bool> vv(valid.begin() + static_cast<std::ptrdiff_t>(b),
                         valid.begin() + static_cast<std::ptrdiff_t>(e));
    return resample_channel(std::span<const double>(v).subspan(b, e - b), vv, cfg.length);
  };

  FeatureTensor x;
  x.bin_hz = p.bin_hz;
  x.split_bin = cut;
  x.channels[0] = band(p.ild, p.ild_valid, false);
  x.channels[1] = band(p.ild, p.ild_valid, true);
  x.channels[2] = band(p.itd, p.itd_valid, false);
  x.channels[3] = band(p.itd, p.itd_valid, true);
  x.channels[4] = cfg.ratio == RatioMode::convolution
                      ? ratio_feature(x.channels[0], x.channels[1], cfg.ratio_epsilon_db)
                      : energy_ratio_feature(x.channels[0], x.channels[1]);
  return x;
}

std::vector<float> flatten(const FeatureTensor& x) {
  std::vector<float> out;
  out.reserve(kFeatureChannels * x.length());
  for (const auto& ch : x.channels)
    for (double v : ch) out.push_back(static_cast<float>(v));
  return out;
}

void FeatureBatch::append(const FeatureTensor& x, double dir_deg, double ori_deg) {
  require(x.length() == length, ErrorCode::invalid_input, "feature length does not match the batch");
  append(flatten(x), dir_deg, ori_deg);
}

void FeatureBatch::append(std::span<const float> x, double dir_deg, double ori_deg) {
  require(x.size() == kFeatureChannels * length, ErrorCode::invalid_input,
          "sample size does not match the batch");
  labels.push_back({dir_deg, ori_deg});
  data.insert(data.end(), x.begin(), x.end());
}

FeatureBatch FeatureBatch::subset(std::span<const std::size_t> indices) const {
  FeatureBatch out;
  out.length = length;
  for (std::size_t i : indices) {
    require(i < count(), ErrorCode::invalid_input, "subset index out of range");
    out.append(sample(i), labels[i][0], labels[i][1]);
  }
  return out;
}

namespace {
constexpr std::uint32_t kBatchVersion = 1;
}

void write_batch(const std::string& path, const FeatureBatch& batch) {
  detail::ByteWriter w;
  w.magic("FEAT");
  w.put<std::uint32_t>(kBatchVersion);
  w.put<std::uint64_t>(batch.count());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(batch.length));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kFeatureChannels));
  for (const auto& l : batch.labels) {
    w.put<double>(l[0]);
    w.put<double>(l[1]);
  }
  for (float v : batch.data) w.put<float>(v);
  w.save(path);
}

FeatureBatch read_batch(const std::string& path) {
  detail::ByteReader r(path);
  r.expect_magic("FEAT");
  require(r.get<std::uint32_t>() == kBatchVersion, ErrorCode::format, path + ": unsupported batch version");
  const auto count = r.get<std::uint64_t>();
  FeatureBatch b;
  b.length = r.get<std::uint32_t>();
  const auto channels = r.get<std::uint32_t>();
  require(channels == kFeatureChannels, ErrorCode::format, path + ": expected 5 channels");
  require(r.remaining() == count * (16 + 4 * kFeatureChannels * b.length), ErrorCode::format,
          path + ": size does not match header");
  b.labels.resize(count);
  for (auto& l : b.labels) {
    l[0] = r.get<double>();
    l[1] = r.get<double>();
  }
  b.data.resize(count * kFeatureChannels * b.length);
  for (auto& v : b.data) v = r.get<float>();
  return b;
}

}  // namespace binori
