#include "binori/directivity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "binio.hpp"
#include "binori/angles.hpp"
#include "binori/error.hpp"

namespace binori {

const char* to_string(TableKind k) {
  switch (k) {
    case TableKind::hrtf_left: return "hrtf-left";
    case TableKind::hrtf_right: return "hrtf-right";
    case TableKind::vdp: return "vdp";
  }
  return "unknown";
}

void unwrap_phase(std::span<double> phase) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t k = 1; k < phase.size(); ++k) {
    const double d = phase[k] - phase[k - 1];
    phase[k] -= two_pi * std::round(d / two_pi);
  }
}

DirectivityTable::DirectivityTable(TableKind kind, std::vector<double> azimuths_deg,
                                   std::vector<std::vector<Complex>> responses, double bin_hz,
                                   double reference_distance_m)
    : kind_(kind),
      azimuths_(std::move(azimuths_deg)),
      responses_(std::move(responses)),
      bin_hz_(bin_hz),
      reference_distance_(reference_distance_m) {
  require(azimuths_.size() >= 3, ErrorCode::invalid_input, "directivity table needs >= 3 azimuths");
  require(azimuths_.size() == responses_.size(), ErrorCode::invalid_input,
          "azimuth and response counts differ");
  require(bin_hz_ > 0.0 && std::isfinite(bin_hz_), ErrorCode::invalid_input, "bin_hz must be positive");
  require(reference_distance_ > 0.0 && std::isfinite(reference_distance_), ErrorCode::invalid_input,
          "reference distance must be positive");
  for (std::size_t i = 0; i < azimuths_.size(); ++i) {
    const double a = azimuths_[i];
    require(a >= -180.0 && a < 180.0, ErrorCode::invalid_input, "azimuths must lie in [-180, 180)");
    if (i > 0)
      require(a > azimuths_[i - 1], ErrorCode::invalid_input, "azimuths must be strictly increasing");
  }
  bins_ = responses_.front().size();
  require(bins_ >= 1, ErrorCode::invalid_input, "responses must be nonempty");
  magnitudes_.resize(responses_.size());
  phases_.resize(responses_.size());
  for (std::size_t i = 0; i < responses_.size(); ++i) {
    const auto& r = responses_[i];
    require(r.size() == bins_, ErrorCode::invalid_input, "all responses must share one bin count");
    magnitudes_[i].resize(bins_);
    phases_[i].resize(bins_);
    for (std::size_t k = 0; k < bins_; ++k) {
      require(std::isfinite(r[k].real()) && std::isfinite(r[k].imag()), ErrorCode::invalid_input,
              "non-finite response value");
      const double m = std::abs(r[k]);
      require(m > 0.0 && m < 1e4, ErrorCode::invalid_input, "response magnitude outside (0, 1e4)");
      magnitudes_[i][k] = m;
      phases_[i][k] = std::arg(r[k]);
    }
    unwrap_phase(phases_[i]);
  }
}

void NearFieldParams::validate() const {
  require(head_radius_m > 0.05 && head_radius_m < 0.15, ErrorCode::invalid_input,
          "head radius must lie in (0.05, 0.15) m");
  require(speed_of_sound_mps > 0.0, ErrorCode::invalid_input, "speed of sound must be positive");
  require(reference_distance_m > 2.0 * head_radius_m, ErrorCode::invalid_geometry,
          "reference distance must exceed the head diameter");
  require(ear_azimuth_deg > 0.0 && ear_azimuth_deg < 180.0, ErrorCode::invalid_input,
          "ear azimuth must lie in (0, 180) degrees");
}

std::vector<Complex> lookup_bins(const DirectivityTable& table, double azimuth_deg) {
  const double th = wrap_deg(azimuth_deg);
  const auto& az = table.azimuths();
  const std::size_t n = az.size();
  auto it = std::lower_bound(az.begin(), az.end(), th);
  if (it != az.end() && *it == th) {
    const auto row = table.row(static_cast<std::size_t>(it - az.begin()));
    return {row.begin(), row.end()};
  }
  std::size_t lo_i, hi_i;
  double lo, hi;
  if (it == az.begin()) {
    lo_i = n - 1;
    hi_i = 0;
    lo = az[n - 1] - 360.0;
    hi = az[0];
  } else if (it == az.end()) {
    lo_i = n - 1;
    hi_i = 0;
    lo = az[n - 1];
    hi = az[0] + 360.0;
  } else {
    hi_i = static_cast<std::size_t>(it - az.begin());
    lo_i = hi_i - 1;
    lo = az[lo_i];
    hi = az[hi_i];
  }
  const double span = hi - lo;
  const double w_lo = (hi - th) / span;
  const double w_hi = (th - lo) / span;
  const auto m0 = table.magnitude(lo_i), m1 = table.magnitude(hi_i);
  const auto p0 = table.phase(lo_i), p1 = table.phase(hi_i);
  std::vector<Complex> out(table.bins());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::polar(w_lo * m0[k] + w_hi * m1[k], w_lo * p0[k] + w_hi * p1[k]);
  return out;
}

Spectrum lookup(const DirectivityTable& table, double azimuth_deg) {
  Spectrum s;
  s.bins = lookup_bins(table, azimuth_deg);
  s.bin_hz = table.bin_hz();
  s.origin_length = 2 * (s.bins.size() - 1);
  return s;
}

std::vector<Complex> resample_response(std::span<const Complex> response, double bin_hz,
                                       std::size_t out_bins, double out_bin_hz) {
  require(!response.empty() && bin_hz > 0.0 && out_bin_hz > 0.0, ErrorCode::invalid_input,
          "resample_response needs a nonempty response and positive spacings");
  const std::size_t n = response.size();
  std::vector<double> mag(n), ph(n);
  for (std::size_t k = 0; k < n; ++k) {
    mag[k] = std::abs(response[k]);
    ph[k] = std::arg(response[k]);
  }
  unwrap_phase(ph);
  std::vector<Complex> out(out_bins);
  for (std::size_t j = 0; j < out_bins; ++j) {
    const double pos = static_cast<double>(j) * out_bin_hz / bin_hz;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= n) {
      out[j] = std::polar(mag[n - 1], ph[n - 1]);
      continue;
    }
    const double t = pos - static_cast<double>(i);
    out[j] = std::polar((1.0 - t) * mag[i] + t * mag[i + 1], (1.0 - t) * ph[i] + t * ph[i + 1]);
  }
  return out;
}

// Rigid sphere ----------------------------------------------------------------

namespace {

// Scaled outgoing spherical Hankel functions h~_n(x) = x e^{-ix} h_n(x)
// (physics e^{-i w t} convention).
void scaled_hankel(double x, std::size_t count, std::vector<Complex>& out) {
  out.resize(std::max<std::size_t>(count, 2));
  out[0] = Complex(0.0, -1.0);
  out[1] = Complex(-1.0, -1.0 / x);
  for (std::size_t n = 1; n + 1 < out.size(); ++n)
    out[n + 1] = (static_cast<double>(2 * n + 1) / x) * out[n] - out[n - 1];
}

// Radial coefficients c_n = (2n+1) h~_n(kr) / D_n(ka) of the sphere series,
// where D_n is the scaled derivative h_n'(ka) e^{-ika} ka. kr <= 0 selects the
// plane-wave limit h~_n -> (-i)^{n+1}.
struct SphereSeries {
  std::vector<Complex> coef;
  double ka = 0.0;
};

SphereSeries sphere_series(double ka, double kr) {
  constexpr std::size_t kMinOrder = 30;
  constexpr std::size_t kMaxOrder = 400;
  const std::size_t cap = std::min<std::size_t>(
      kMaxOrder, std::max<std::size_t>(kMinOrder, static_cast<std::size_t>(2.0 * ka + 40.0)));
  std::vector<Complex> ha, hr;
  scaled_hankel(ka, cap + 2, ha);
  const bool plane = kr <= 0.0;
  if (!plane) scaled_hankel(kr, cap + 2, hr);

  SphereSeries s;
  s.ka = ka;
  Complex plane_term(0.0, -1.0);  // (-i)^{n+1}
  int small_run = 0;
  double largest = 0.0;
  for (std::size_t n = 0; n <= cap; ++n) {
    const Complex d = n == 0 ? -ha[1]
                             : ha[n - 1] - (static_cast<double>(n + 1) / ka) * ha[n];
    if (!std::isfinite(std::abs(d)) || std::abs(d) > 1e280) break;
    const Complex radial = plane ? plane_term : hr[n];
    if (!std::isfinite(std::abs(radial))) break;
    const Complex c = static_cast<double>(2 * n + 1) * radial / d;
    s.coef.push_back(c);
    plane_term *= Complex(0.0, -1.0);
    largest = std::max(largest, std::abs(c));
    if (n >= kMinOrder && static_cast<double>(n) > ka) {
      small_run = std::abs(c) < 1e-17 * largest ? small_run + 1 : 0;
      if (small_run >= 3) break;
    }
  }
  return s;
}

// Evaluates the series at cos(incidence) and converts to the fft() convention.
Complex evaluate(const SphereSeries& s, double mu) {
  Complex sum(0.0, 0.0);
  double p_prev = 0.0, p = 1.0;  // Legendre P_{n-1}, P_n
  for (std::size_t n = 0; n < s.coef.size(); ++n) {
    sum += s.coef[n] * p;
    const double nd = static_cast<double>(n);
    const double next = ((2.0 * nd + 1.0) * mu * p - nd * p_prev) / (nd + 1.0);
    p_prev = p;
    p = next;
  }
  const Complex h = -std::polar(1.0 / s.ka, -s.ka) * sum;
  return std::conj(h);
}

double wavenumber(double freq_hz, double c) { return 2.0 * std::numbers::pi * freq_hz / c; }

}  // namespace

Complex sphere_response(double freq_hz, double incidence_rad, double source_distance_m,
                        double radius_m, double speed_of_sound_mps) {
  require(freq_hz >= 0.0 && radius_m > 0.0 && speed_of_sound_mps > 0.0, ErrorCode::invalid_input,
          "sphere_response needs f >= 0, a > 0, c > 0");
  require(source_distance_m > radius_m, ErrorCode::invalid_geometry,
          "source must lie outside the sphere");
  if (freq_hz == 0.0) return {1.0, 0.0};
  const double k = wavenumber(freq_hz, speed_of_sound_mps);
  return evaluate(sphere_series(k * radius_m, k * source_distance_m), std::cos(incidence_rad));
}

Complex sphere_response_plane(double freq_hz, double incidence_rad, double radius_m,
                              double speed_of_sound_mps) {
  require(freq_hz >= 0.0 && radius_m > 0.0 && speed_of_sound_mps > 0.0, ErrorCode::invalid_input,
          "sphere_response_plane needs f >= 0, a > 0, c > 0");
  if (freq_hz == 0.0) return {1.0, 0.0};
  const double k = wavenumber(freq_hz, speed_of_sound_mps);
  return evaluate(sphere_series(k * radius_m, 0.0), std::cos(incidence_rad));
}

Complex distance_variation(double freq_hz, double incidence_rad, double target_distance_m,
                           const NearFieldParams& params) {
  if (target_distance_m == params.reference_distance_m || freq_hz == 0.0) return {1.0, 0.0};
  require(target_distance_m > 2.0 * params.head_radius_m, ErrorCode::invalid_geometry,
          "target distance must exceed the head diameter");
  const Complex near = sphere_response(freq_hz, incidence_rad, target_distance_m,
                                       params.head_radius_m, params.speed_of_sound_mps);
  const Complex ref = sphere_response(freq_hz, incidence_rad, params.reference_distance_m,
                                      params.head_radius_m, params.speed_of_sound_mps);
  return near / ref;
}

std::vector<std::vector<Complex>> distance_variation_rows(std::size_t bins, double bin_hz,
                                                          std::span<const double> incidences_rad,
                                                          double target_distance_m,
                                                          const NearFieldParams& params) {
  std::vector<std::vector<Complex>> rows(incidences_rad.size(),
                                         std::vector<Complex>(bins, Complex(1.0, 0.0)));
  if (target_distance_m == params.reference_distance_m) return rows;
  require(target_distance_m > 2.0 * params.head_radius_m, ErrorCode::invalid_geometry,
          "target distance must exceed the head diameter");
  std::vector<double> mu(incidences_rad.size());
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = std::cos(incidences_rad[i]);
  for (std::size_t k = 1; k < bins; ++k) {
    const double kk = wavenumber(static_cast<double>(k) * bin_hz, params.speed_of_sound_mps);
    const double ka = kk * params.head_radius_m;
    const SphereSeries near = sphere_series(ka, kk * target_distance_m);
    const SphereSeries ref = sphere_series(ka, kk * params.reference_distance_m);
    for (std::size_t i = 0; i < mu.size(); ++i) rows[i][k] = evaluate(near, mu[i]) / evaluate(ref, mu[i]);
  }
  return rows;
}

double ear_incidence_rad(TableKind ear, double source_azimuth_deg, const NearFieldParams& params) {
  const double th = wrap_deg(source_azimuth_deg);
  switch (ear) {
    case TableKind::hrtf_right: return deg2rad(std::fabs(wrap_deg(th - params.ear_azimuth_deg)));
    case TableKind::hrtf_left: return deg2rad(std::fabs(wrap_deg(th + params.ear_azimuth_deg)));
    case TableKind::vdp: break;
  }
  return deg2rad(std::fabs(th));
}

DirectivityTable near_field_correct(const DirectivityTable& table, const NearFieldParams& params,
                                    double target_distance_m) {
  require(table.kind() != TableKind::vdp, ErrorCode::invalid_input,
          "near-field correction applies to HRTF tables only");
  params.validate();
  if (target_distance_m == params.reference_distance_m) return table;
  require(target_distance_m > 2.0 * params.head_radius_m && target_distance_m <= 1e7,
          ErrorCode::invalid_geometry, "target distance must exceed the head diameter");

  std::vector<std::vector<Complex>> rows(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) rows[i].assign(table.row(i).begin(), table.row(i).end());
  std::vector<double> mu(table.size());
  for (std::size_t i = 0; i < table.size(); ++i)
    mu[i] = std::cos(ear_incidence_rad(table.kind(), table.azimuths()[i], params));

  for (std::size_t k = 1; k < table.bins(); ++k) {
    const double kk = wavenumber(static_cast<double>(k) * table.bin_hz(), params.speed_of_sound_mps);
    const double ka = kk * params.head_radius_m;
    const SphereSeries near = sphere_series(ka, kk * target_distance_m);
    const SphereSeries ref = sphere_series(ka, kk * params.reference_distance_m);
    for (std::size_t i = 0; i < table.size(); ++i)
      rows[i][k] *= evaluate(near, mu[i]) / evaluate(ref, mu[i]);
  }
  return DirectivityTable(table.kind(), table.azimuths(), std::move(rows), table.bin_hz(),
                          table.reference_distance());
}

// Synthetic tables ------------------------------------------------------------

namespace {

std::vector<double> azimuth_grid(double step_deg) {
  require(step_deg > 0.0, ErrorCode::invalid_input, "grid step must be positive");
  const double count = 360.0 / step_deg;
  const auto n = static_cast<std::size_t>(std::llround(count));
  require(std::fabs(count - static_cast<double>(n)) < 1e-9 && n >= 3, ErrorCode::invalid_input,
          "grid step must divide 360 into at least 3 cells");
  std::vector<double> az(n);
  for (std::size_t i = 0; i < n; ++i) az[i] = static_cast<double>(i) * step_deg - 180.0;
  return az;
}

double frequency_ramp(double f, double full_hz) { return std::min(1.0, f / full_hz); }

}  // namespace

std::pair<DirectivityTable, DirectivityTable> synth_hrtf(const NearFieldParams& params,
                                                         double grid_step_deg, std::size_t bins,
                                                         double bin_hz, const PinnaModel& pinna) {
  params.validate();
  require(bins >= 2 && bin_hz > 0.0, ErrorCode::invalid_input, "synth_hrtf needs >= 2 bins");
  require(pinna.strength >= 0.0 && pinna.strength < 1.0, ErrorCode::invalid_input,
          "pinna strength must lie in [0, 1)");
  const auto az = azimuth_grid(grid_step_deg);

  // Per-bin series at the reference distance, shared by every azimuth.
  std::vector<SphereSeries> series(bins);
  for (std::size_t k = 1; k < bins; ++k) {
    const double kk = wavenumber(static_cast<double>(k) * bin_hz, params.speed_of_sound_mps);
    series[k] = sphere_series(kk * params.head_radius_m, kk * params.reference_distance_m);
  }

  auto right_ear = [&](double source_az) {
    const double mu = std::cos(ear_incidence_rad(TableKind::hrtf_right, source_az, params));
    const double behind = (1.0 - std::cos(deg2rad(std::fabs(wrap_deg(source_az - pinna.axis_deg))))) / 2.0;
    std::vector<Complex> row(bins);
    row[0] = Complex(1.0, 0.0);
    for (std::size_t k = 1; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double shade = 1.0 - pinna.strength * frequency_ramp(f, pinna.full_effect_hz) * behind;
      row[k] = evaluate(series[k], mu) * shade;
    }
    return row;
  };

  std::vector<std::vector<Complex>> left(az.size()), right(az.size());
  for (std::size_t i = 0; i < az.size(); ++i) {
    right[i] = right_ear(az[i]);
    left[i] = right_ear(wrap_deg(-az[i]));
  }
  return {DirectivityTable(TableKind::hrtf_left, az, std::move(left), bin_hz, params.reference_distance_m),
          DirectivityTable(TableKind::hrtf_right, az, std::move(right), bin_hz, params.reference_distance_m)};
}

DirectivityTable synth_vdp(double directivity_strength, std::size_t bins, double bin_hz,
                           double grid_step_deg) {
  require(directivity_strength >= 0.0 && directivity_strength < 1.0, ErrorCode::invalid_input,
          "directivity strength must lie in [0, 1)");
  require(bins >= 2 && bin_hz > 0.0, ErrorCode::invalid_input, "synth_vdp needs >= 2 bins");
  const auto az = azimuth_grid(grid_step_deg);
  std::vector<std::vector<Complex>> rows(az.size(), std::vector<Complex>(bins));
  for (std::size_t i = 0; i < az.size(); ++i) {
    const double off_axis = (1.0 - std::cos(deg2rad(std::fabs(az[i])))) / 2.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double a = directivity_strength * frequency_ramp(static_cast<double>(k) * bin_hz, 8000.0);
      rows[i][k] = Complex(1.0 - a * off_axis, 0.0);
    }
  }
  return DirectivityTable(TableKind::vdp, az, std::move(rows), bin_hz, 1.0);
}

DirectivityTable identity_table(TableKind kind, std::size_t bins, double bin_hz, double grid_step_deg,
                                double reference_distance_m) {
  const auto az = azimuth_grid(grid_step_deg);
  std::vector<std::vector<Complex>> rows(az.size(), std::vector<Complex>(bins, Complex(1.0, 0.0)));
  return DirectivityTable(kind, az, std::move(rows), bin_hz, reference_distance_m);
}

// Container -------------------------------------------------------------------

namespace {
constexpr std::uint32_t kTableVersion = 1;
}

void write_table(const std::string& path, const DirectivityTable& table,
                 const std::map<std::string, std::string>& sidecar) {
  detail::ByteWriter w;
  w.magic("DIRT");
  w.put<std::uint32_t>(kTableVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.kind()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(table.bins()));
  w.put<double>(table.bin_hz());
  w.put<double>(table.reference_distance());
  for (double a : table.azimuths()) w.put<double>(a);
  for (std::size_t i = 0; i < table.size(); ++i)
    for (const Complex& c : table.row(i)) {
      w.put<double>(c.real());
      w.put<double>(c.imag());
    }
  w.save(path);
  if (!sidecar.empty()) {
    auto kv = sidecar;
    kv.emplace("kind", to_string(table.kind()));
    kv.emplace("azimuth_count", std::to_string(table.size()));
    kv.emplace("bin_count", std::to_string(table.bins()));
    write_sidecar(path + ".meta", kv);
  }
}

DirectivityTable read_table(const std::string& path) {
  detail::ByteReader r(path);
  r.expect_magic("DIRT");
  const auto version = r.get<std::uint32_t>();
  require(version == kTableVersion, ErrorCode::format, path + ": unsupported table version");
  const auto kind = r.get<std::uint32_t>();
  require(kind <= 2, ErrorCode::format, path + ": unknown table kind");
  const auto count = r.get<std::uint32_t>();
  const auto bins = r.get<std::uint32_t>();
  const double bin_hz = r.get<double>();
  const double ref = r.get<double>();
  require(r.remaining() == static_cast<std::size_t>(count) * 8 * (1 + 2 * static_cast<std::size_t>(bins)),
          ErrorCode::format, path + ": size does not match header");
  std::vector<double> az(count);
  for (auto& a : az) a = r.get<double>();
  std::vector<std::vector<Complex>> rows(count, std::vector<Complex>(bins));
  for (auto& row : rows)
    for (auto& c : row) {
      const double re = r.get<double>();
      c = Complex(re, r.get<double>());
    }
  return DirectivityTable(static_cast<TableKind>(kind), std::move(az), std::move(rows), bin_hz, ref);
}

void write_sidecar(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
}

std::map<std::string, std::string> read_sidecar(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::format, path + ": expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace binori
