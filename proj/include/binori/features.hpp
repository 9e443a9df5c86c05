#pragma once

#include <array>
#include <string>
#include <vector>

#include "binori/preprocess.hpp"
#include "binori/renderer.hpp"
#include "binori/signal.hpp"

namespace binori {

inline constexpr std::size_t kFeatureChannels = 5;

enum class FeatureChannel { ild_low = 0, ild_high = 1, itd_low = 2, itd_high = 3, ratio = 4 };

struct FeatureTensor {
  std::array<std::vector<double>, kFeatureChannels> channels;
  double bin_hz = 0.0;
  std::size_t split_bin = 0;  // first bin of the high band

  std::size_t length() const { return channels[0].size(); }
  const std::vector<double>& operator[](FeatureChannel c) const {
    return channels[static_cast<std::size_t>(c)];
  }
};

enum class FeatureMode { whole_utterance, frame_average };
enum class RatioMode { convolution, energy_ratio };

struct FeatureConfig {
  std::size_t length = 512;
  double speed_of_sound_mps = 343.0;
  FeatureMode mode = FeatureMode::whole_utterance;
  RatioMode ratio = RatioMode::convolution;
  double ratio_epsilon_db = 0.5;
  FloorConfig floor;
  std::size_t frame_len = kDefaultFrameLen;  // frame_average mode
  std::size_t hop = kDefaultHop;
};

/// Bins where at least one ear is nonzero.
std::vector<bool> valid_bins(const Spectrum& yl, const Spectrum& yr);

/// 20 log10(|Y_l| / |Y_r|) per bin, clamped to [-60, 60] dB; 0 where both
/// ears are zero. Swapping the ears negates the result exactly.
std::vector<double> ild(const Spectrum& yl, const Spectrum& yr);

/// Principal-value interaural phase over 2 pi f, in seconds; 0 at DC and where
/// both ears are zero. |itd(f)| <= 1 / (2 f) holds for every bin.
std::vector<double> itd(const Spectrum& yl, const Spectrum& yr);

/// Spatial aliasing limit c / (2 h) for ears h metres apart.
double aliasing_frequency(double h_m, double c_mps = 343.0);

/// Number of bins with frequency <= f_split.
std::size_t split_index(std::size_t bins, double bin_hz, double f_split);

struct BandSplit {
  std::vector<double> low;
  std::vector<double> high;
};
/// low = bins with f <= f_split, high = the rest.
BandSplit split_bands(const std::vector<double>& vec, double bin_hz, double f_split);

/// Averages a channel onto `length` points. Each output point covers an equal
/// fractional span of the input; only valid input bins contribute, weighted
/// by overlap. Points with no valid input are interpolated linearly from the
/// nearest points that have some (held constant at the ends); all zeros when
/// no input is valid.
std::vector<double> resample_channel(std::span<const double> values, const std::vector<bool>& valid,
                                     std::size_t length);

/// Linear convolution of ild_high with 1 / reg(ild_low), reg(x) = sign(x)
/// max(|x|, eps), centre-cropped to ild_high's length.
std::vector<double> ratio_feature(const std::vector<double>& ild_low, const std::vector<double>& ild_high,
                                  double epsilon_db = 0.5);

/// Alternate ratio channel: high-band ILD relative to the mean low-band ILD.
std::vector<double> energy_ratio_feature(const std::vector<double>& ild_low,
                                         const std::vector<double>& ild_high);

/// Five-channel features of a (preprocessed) recording. The split frequency
/// uses the recording's head width. Throws empty_features when every bin of
/// both ears is zero.
FeatureTensor assemble(const BinauralRecording& rec, const FeatureConfig& cfg = {});

/// Row-major (channel, position) float copy used by batch files and the model.
std::vector<float> flatten(const FeatureTensor& x);

// Batch container ------------------------------------------------------------

struct FeatureBatch {
  std::size_t length = 512;
  std::vector<std::array<double, 2>> labels;  // (theta_dir, theta_ori) degrees
  std::vector<float> data;                    // count x 5 x length

  std::size_t count() const { return labels.size(); }
  std::span<const float> sample(std::size_t i) const {
    return std::span<const float>(data).subspan(i * kFeatureChannels * length, kFeatureChannels * length);
  }
  void append(const FeatureTensor& x, double dir_deg, double ori_deg);
  void append(std::span<const float> x, double dir_deg, double ori_deg);
  FeatureBatch subset(std::span<const std::size_t> indices) const;
};

void write_batch(const std::string& path, const FeatureBatch& batch);
FeatureBatch read_batch(const std::string& path);

}  // namespace binori
