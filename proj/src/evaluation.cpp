#include "binori/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "binori/angles.hpp"
#include "binori/error.hpp"

namespace binori {

const char* facing_class_name(int c) {
  switch (c) {
    case 0: return "facing & facing";
    case 1: return "facing & non-facing";
    case 2: return "non-facing & facing";
    case 3: return "non-facing & non-facing";
  }
  return "unknown";
}

int facing_class(double theta_dir_deg, double theta_ori_deg, const FacingConfig& cfg) {
  const double b = cfg.bound();
  const bool dir_facing = std::fabs(wrap_deg(theta_dir_deg)) <= b;
  const bool ori_facing = std::fabs(wrap_deg(theta_ori_deg)) <= b;
  return (dir_facing ? 0 : 2) + (ori_facing ? 0 : 1);
}

Confusion facing_classify(std::span<const double> pred_dir, std::span<const double> pred_ori,
                          std::span<const double> true_dir, std::span<const double> true_ori,
                          const FacingConfig& cfg) {
  const std::size_t n = true_dir.size();
  require(pred_dir.size() == n && pred_ori.size() == n && true_ori.size() == n, ErrorCode::invalid_input,
          "prediction and label counts differ");
  Confusion c{};
  for (std::size_t i = 0; i < n; ++i)
    ++c[facing_class(true_dir[i], true_ori[i], cfg)][facing_class(pred_dir[i], pred_ori[i], cfg)];
  return c;
}

double percentile(std::vector<double> v, double q) {
  require(!v.empty(), ErrorCode::invalid_input, "percentile of an empty set");
  require(q >= 0.0 && q <= 100.0, ErrorCode::invalid_input, "percentile must lie in [0, 100]");
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return v[lo] + t * (v[hi] - v[lo]);
}

AngleStats angle_stats(std::span<const double> pred_deg, std::span<const double> true_deg) {
  require(pred_deg.size() == true_deg.size() && !true_deg.empty(), ErrorCode::invalid_input,
          "evaluation needs matching, nonempty prediction and label lists");
  AngleStats s;
  const std::size_t n = true_deg.size();
  s.errors.resize(n);
  std::array<double, kSectors> sum{};
  for (std::size_t i = 0; i < n; ++i) {
    s.errors[i] = angular_error(pred_deg[i], true_deg[i]);
    s.mean += s.errors[i];
    auto k = static_cast<std::size_t>(std::floor((wrap_deg(true_deg[i]) + 180.0) / 10.0));
    k = std::min(k, kSectors - 1);
    sum[k] += s.errors[i];
    ++s.sector_count[k];
  }
  s.mean /= static_cast<double>(n);
  for (std::size_t k = 0; k < kSectors; ++k)
    s.sector_mean[k] = s.sector_count[k] ? sum[k] / static_cast<double>(s.sector_count[k])
                                         : std::numeric_limits<double>::quiet_NaN();
  std::vector<double> sorted = s.errors;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n && sorted[i + 1] == sorted[i]) continue;
    s.cdf.emplace_back(sorted[i], static_cast<double>(i + 1) / static_cast<double>(n));
  }
  s.p50 = percentile(s.errors, 50.0);
  s.p80 = percentile(s.errors, 80.0);
  s.p90 = percentile(s.errors, 90.0);
  return s;
}

EvalReport evaluate(std::span<const double> pred_dir, std::span<const double> pred_ori,
                    std::span<const double> true_dir, std::span<const double> true_ori,
                    const FacingConfig& facing) {
  EvalReport r;
  r.count = true_dir.size();
  r.dir = angle_stats(pred_dir, true_dir);
  r.ori = angle_stats(pred_ori, true_ori);
  r.facing = facing;
  r.confusion = facing_classify(pred_dir, pred_ori, true_dir, true_ori, facing);
  for (int c = 0; c < 4; ++c) {
    std::size_t total = 0;
    for (std::size_t v : r.confusion[c]) total += v;
    r.class_accuracy[c] = total ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(total)
                                : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

EvalReport evaluate(const EstimatorModel& model, const FeatureBatch& test, const FacingConfig& facing) {
  require(test.count() > 0, ErrorCode::invalid_input, "test batch is empty");
  const auto pred = predict(model, test);
  std::vector<double> pd, po, td, to;
  for (std::size_t i = 0; i < test.count(); ++i) {
    pd.push_back(pred[i].theta_dir_deg);
    po.push_back(pred[i].theta_ori_deg);
    td.push_back(test.labels[i][0]);
    to.push_back(test.labels[i][1]);
  }
  return evaluate(pd, po, td, to, facing);
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json stats_json(const AngleStats& s) {
  nlohmann::json sectors = nlohmann::json::array();
  for (std::size_t k = 0; k < kSectors; ++k)
    sectors.push_back({{"center_deg", -175.0 + 10.0 * static_cast<double>(k)},
                       {"mean_error_deg", number_or_null(s.sector_mean[k])},
                       {"count", s.sector_count[k]}});
  return {{"p50_deg", s.p50}, {"p80_deg", s.p80}, {"p90_deg", s.p90}, {"mean_deg", s.mean}, {"sectors", sectors}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << text;
  require(f.good(), ErrorCode::io, "failed writing " + path);
}

std::string cdf_csv(const AngleStats& s) {
  std::ostringstream o;
  o << std::setprecision(10) << "error,percentile\n";
  for (const auto& [e, p] : s.cdf) o << e << ',' << 100.0 * p << '\n';
  return o.str();
}

std::string polar_csv(const AngleStats& s) {
  std::ostringstream o;
  o << std::setprecision(10) << "sector_center,mean_error\n";
  for (std::size_t k = 0; k < kSectors; ++k) o << -175.0 + 10.0 * static_cast<double>(k) << ',' << s.sector_mean[k] << '\n';
  return o.str();
}

}  // namespace

std::string report_json(const EvalReport& r) {
  nlohmann::json conf = nlohmann::json::array();
  for (const auto& row : r.confusion) conf.push_back(row);
  nlohmann::json acc = nlohmann::json::array();
  nlohmann::json names = nlohmann::json::array();
  for (int c = 0; c < 4; ++c) {
    acc.push_back(number_or_null(r.class_accuracy[c]));
    names.push_back(facing_class_name(c));
  }
  nlohmann::json j = {{"count", r.count},
                      {"theta_dir", stats_json(r.dir)},
                      {"theta_ori", stats_json(r.ori)},
                      {"facing",
                       {{"bound_deg", r.facing.bound()},
                        {"classes", names},
                        {"confusion", conf},
                        {"class_accuracy", acc}}}};
  return j.dump(2);
}

void write_report(const std::string& prefix, const EvalReport& r) {
  write_text(prefix + "report.json", report_json(r) + "\n");
  write_text(prefix + "cdf_dir.csv", cdf_csv(r.dir));
  write_text(prefix + "cdf_ori.csv", cdf_csv(r.ori));
  write_text(prefix + "polar_dir.csv", polar_csv(r.dir));
  write_text(prefix + "polar_ori.csv", polar_csv(r.ori));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::invalid_input, "correlation needs equal nonempty vectors");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::equal(a.begin(), a.end(), b.begin()) ? 1.0 : 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

std::vector<std::vector<double>> correlate(const std::vector<std::vector<double>>& vecs) {
  const std::size_t n = vecs.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) m[i][j] = m[j][i] = pearson(vecs[i], vecs[j]);
  }
  return m;
}

std::vector<double> db(std::span<const Complex> row) {
  std::vector<double> out(row.size());
  for (std::size_t k = 0; k < row.size(); ++k) out[k] = 20.0 * std::log10(std::max(std::abs(row[k]), 1e-12));
  return out;
}

}  // namespace

CorrelationMatrices correlation_diagnostic(const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                                           const DirectivityTable& vdp, double grid_step_deg) {
  require(grid_step_deg > 0.0 && std::fmod(360.0, grid_step_deg) == 0.0, ErrorCode::invalid_input,
          "grid step must divide 360");
  require(hrtf_l.bins() == hrtf_r.bins(), ErrorCode::invalid_input, "HRTF tables differ in bin count");
  CorrelationMatrices out;
  const auto steps = static_cast<std::size_t>(std::llround(360.0 / grid_step_deg));
  for (std::size_t i = 0; i < steps; ++i) out.angles_deg.push_back(-180.0 + grid_step_deg * static_cast<double>(i));

  std::vector<std::vector<double>> h, v, hl, hr;
  for (double a : out.angles_deg) {
    hl.push_back(db(lookup_bins(hrtf_l, a)));
    hr.push_back(db(lookup_bins(hrtf_r, a)));
    std::vector<double> both = hl.back();
    both.insert(both.end(), hr.back().begin(), hr.back().end());
    h.push_back(std::move(both));
    v.push_back(db(lookup_bins(vdp, a)));
  }
  out.hrtf = correlate(h);
  out.vdp = correlate(v);

  // Combined pattern on the VDP's bin grid: |H| resampled to those bins, in dB, plus |V| in dB.
  std::vector<std::vector<double>> c;
  for (std::size_t d = 0; d < steps; ++d) {
    const auto l = resample_response(lookup_bins(hrtf_l, out.angles_deg[d]), hrtf_l.bin_hz(), vdp.bins(), vdp.bin_hz());
    const auto r = resample_response(lookup_bins(hrtf_r, out.angles_deg[d]), hrtf_r.bin_hz(), vdp.bins(), vdp.bin_hz());
    const auto ld = db(l), rd = db(r);
    for (std::size_t o = 0; o < steps; ++o) {
      std::vector<double> vec(ld.size() + rd.size());
      for (std::size_t k = 0; k < ld.size(); ++k) {
        vec[k] = ld[k] + v[o][k];
        vec[ld.size() + k] = rd[k] + v[o][k];
      }
      c.push_back(std::move(vec));
    }
  }
  out.combined = correlate(c);
  return out;
}

void write_matrix_csv(const std::string& path, const std::vector<std::vector<double>>& m) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << std::setprecision(12);
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) f << (j ? "," : "") << row[j];
    f << '\n';
  }
  require(f.good(), ErrorCode::io, "failed writing " + path);
}

}  // namespace binori
