#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "binori/dataset.hpp"
#include "binori/estimator.hpp"

namespace binori {

inline constexpr std::size_t kSectors = 36;

struct AngleStats {
  std::vector<double> errors;                     // per sample, degrees in [0, 180]
  std::vector<std::pair<double, double>> cdf;     // (error, fraction of samples <= error)
  double p50 = 0, p80 = 0, p90 = 0, mean = 0;
  std::array<double, kSectors> sector_mean{};     // NaN when a sector has no samples
  std::array<std::size_t, kSectors> sector_count{};
};

/// Class index: 2 * (listener not facing) + (speaker not facing), i.e.
/// 0 facing & facing, 1 facing & non-facing, 2 non-facing & facing,
/// 3 non-facing & non-facing.
using Confusion = std::array<std::array<std::size_t, 4>, 4>;  // [true][predicted]

struct FacingConfig {
  double sector_deg = 25.0;
  bool half_width = false;  // facing when |theta| <= sector / 2 instead of <= sector
  double bound() const { return half_width ? sector_deg / 2.0 : sector_deg; }
};

struct EvalReport {
  std::size_t count = 0;
  AngleStats dir, ori;
  Confusion confusion{};
  std::array<double, 4> class_accuracy{};  // NaN for classes without samples
  FacingConfig facing;
};

const char* facing_class_name(int c);
int facing_class(double theta_dir_deg, double theta_ori_deg, const FacingConfig& cfg = {});
Confusion facing_classify(std::span<const double> pred_dir, std::span<const double> pred_ori,
                          std::span<const double> true_dir, std::span<const double> true_ori,
                          const FacingConfig& cfg = {});

/// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);
AngleStats angle_stats(std::span<const double> pred_deg, std::span<const double> true_deg);

/// Report from predicted and true angles.
EvalReport evaluate(std::span<const double> pred_dir, std::span<const double> pred_ori,
                    std::span<const double> true_dir, std::span<const double> true_ori,
                    const FacingConfig& facing = {});
EvalReport evaluate(const EstimatorModel& model, const FeatureBatch& test, const FacingConfig& facing = {});

/// Writes <prefix>report.json, <prefix>cdf_dir.csv, <prefix>cdf_ori.csv,
/// <prefix>polar_dir.csv, <prefix>polar_ori.csv.
void write_report(const std::string& prefix, const EvalReport& report);
std::string report_json(const EvalReport& report);

struct CorrelationMatrices {
  std::vector<double> angles_deg;
  std::vector<std::vector<double>> hrtf;      // over theta_dir
  std::vector<std::vector<double>> vdp;       // over theta_ori
  std::vector<std::vector<double>> combined;  // over (theta_dir, theta_ori), dir-major
};

/// Pearson correlation of per-bin magnitude vectors (dB) across grid angles.
/// HRTF vectors concatenate both ears; VDP vectors are the pattern row; the
/// combined vectors concatenate both ears of |H(theta_dir)| |V(theta_ori)|.
/// Two constant vectors correlate as 1 when equal and 0 otherwise.
CorrelationMatrices correlation_diagnostic(const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                                           const DirectivityTable& vdp, double grid_step_deg);
double pearson(std::span<const double> a, std::span<const double> b);
void write_matrix_csv(const std::string& path, const std::vector<std::vector<double>>& m);

}  // namespace binori
