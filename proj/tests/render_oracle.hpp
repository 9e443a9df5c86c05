#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "oracles.hpp"

#include "binori/renderer.hpp"

namespace oracle {

using binori::Complex;
using binori::DirectivityTable;
using binori::NearFieldParams;
using binori::render_fft_length;

// Independent reference: per-factor interpolation, series DVF and a direct DFT.
struct RenderReference {
  struct Polar {
    std::vector<double> mag, ph;
  };

  static Polar polar_row(std::span<const Complex> row) {
    Polar p;
    for (auto c : row) p.mag.push_back(std::abs(c)), p.ph.push_back(std::arg(c));
    for (std::size_t k = 1; k < p.ph.size(); ++k) {
      double d = p.ph[k] - p.ph[k - 1];
      while (d > std::numbers::pi) d -= 2 * std::numbers::pi, p.ph[k] -= 2 * std::numbers::pi;
      while (d < -std::numbers::pi) d += 2 * std::numbers::pi, p.ph[k] += 2 * std::numbers::pi;
    }
    return p;
  }

  static std::vector<Complex> at_angle(const DirectivityTable& t, double deg) {
    double th = std::fmod(deg + 180.0, 360.0);
    if (th < 0) th += 360.0;
    th -= 180.0;
    const auto& az = t.azimuths();
    const std::size_t n = az.size();
    std::size_t j = 0;
    while (j < n && az[j] <= th) ++j;
    if (j > 0 && az[j - 1] == th) return {t.row(j - 1).begin(), t.row(j - 1).end()};
    const std::size_t lo = j == 0 ? n - 1 : j - 1, hi = j == n ? 0 : j;
    const double a0 = j == 0 ? az[n - 1] - 360.0 : az[lo];
    const double a1 = j == n ? az[0] + 360.0 : az[hi];
    const double w = (th - a0) / (a1 - a0);
    const auto p0 = polar_row(t.row(lo)), p1 = polar_row(t.row(hi));
    std::vector<Complex> out(t.bins());
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = std::polar((1 - w) * p0.mag[k] + w * p1.mag[k], (1 - w) * p0.ph[k] + w * p1.ph[k]);
    return out;
  }

  static std::vector<Complex> to_bins(const std::vector<Complex>& r, double bin_hz, std::size_t bins, double out_hz) {
    const auto p = polar_row(r);
    std::vector<Complex> out(bins);
    for (std::size_t j = 0; j < bins; ++j) {
      const double pos = j * out_hz / bin_hz;
      const auto i = static_cast<std::size_t>(pos);
      if (i + 1 >= r.size()) {
        out[j] = std::polar(p.mag.back(), p.ph.back());
        continue;
      }
      const double w = pos - i;
      out[j] = std::polar((1 - w) * p.mag[i] + w * p.mag[i + 1], (1 - w) * p.ph[i] + w * p.ph[i + 1]);
    }
    return out;
  }

  static Complex dvf(double f, double inc, double r, const NearFieldParams& p) {
    if (f == 0 || r == p.reference_distance_m) return 1.0;
    const auto order = static_cast<unsigned>(50 + 4 * std::numbers::pi * f / p.speed_of_sound_mps * p.head_radius_m);
    const auto q = oracle::sphere_point_source(f, inc, r, p.head_radius_m, p.speed_of_sound_mps, order) /
                   oracle::sphere_point_source(f, inc, p.reference_distance_m, p.head_radius_m,
                                               p.speed_of_sound_mps, order);
    return std::conj(Complex(static_cast<double>(q.real()), static_cast<double>(q.imag())));
  }

  static std::pair<std::vector<double>, std::vector<double>> run(const std::vector<double>& x, double rate, double dir,
                                                                 double ori, double r, double h,
                                                                 const DirectivityTable& hl_t,
                                                                 const DirectivityTable& hr_t,
                                                                 const DirectivityTable& v_t,
                                                                 const NearFieldParams* nf) {
    const std::size_t n = render_fft_length(x.size(), hl_t);
    const double fhz = rate / n;
    std::vector<double> padded(n, 0.0);
    std::copy(x.begin(), x.end(), padded.begin());
    const auto X = oracle::dft(padded);

    auto hl = at_angle(hl_t, dir), hr = at_angle(hr_t, dir);
    double vl = ori, vr = ori;
    if (nf) {
      const double thl = std::fabs(std::remainder(dir + nf->ear_azimuth_deg, 360.0)) * std::numbers::pi / 180;
      const double thr = std::fabs(std::remainder(dir - nf->ear_azimuth_deg, 360.0)) * std::numbers::pi / 180;
      for (std::size_t k = 0; k < hl.size(); ++k) {
        hl[k] *= dvf(k * hl_t.bin_hz(), thl, r, *nf);
        hr[k] *= dvf(k * hl_t.bin_hz(), thr, r, *nf);
      }
      const double d = std::remainder(dir, 360.0);
      const double t = std::fabs(d) * std::numbers::pi / 180;
      double a = std::asin(h / 2 / r) * 180 / std::numbers::pi;
      const double b = std::atan(h * std::cos(t) / 2 / (r - h * std::sin(t) / 2)) * 180 / std::numbers::pi;
      if (std::fabs(d) > 90) a = -a;
      if (d >= 0) vl = ori - a, vr = ori + b;
      else vl = ori - b, vr = ori + a;
    }
    const auto vlf = to_bins(at_angle(v_t, vl), v_t.bin_hz(), X.size(), fhz);
    const auto vrf = to_bins(at_angle(v_t, vr), v_t.bin_hz(), X.size(), fhz);
    const auto hlf = to_bins(hl, hl_t.bin_hz(), X.size(), fhz);
    const auto hrf = to_bins(hr, hr_t.bin_hz(), X.size(), fhz);

    auto inverse = [&](const std::vector<Complex>& H, const std::vector<Complex>& V) {
      std::vector<double> y(x.size());
      for (std::size_t t = 0; t < y.size(); ++t) {
        long double acc = 0;
        for (std::size_t k = 0; k < X.size(); ++k) {
          const Complex Y = X[k] * (H[k] * V[k]);
          const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
          const long double ang = 2.0L * std::numbers::pi_v<long double> * ((k * t) % n) / n;
          acc += (edge ? 1.0L : 2.0L) * (Y.real() * std::cos(ang) - Y.imag() * std::sin(ang));
        }
        y[t] = static_cast<double>(acc / n);
      }
      return y;
    };
    return {inverse(hlf, vlf), inverse(hrf, vrf)};
  }
};

}  // namespace oracle
