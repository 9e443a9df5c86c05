#pragma once

#include <cmath>
#include <numbers>

namespace binori {

inline constexpr double deg2rad(double d) { return d * (std::numbers::pi / 180.0); }
inline constexpr double rad2deg(double r) { return r * (180.0 / std::numbers::pi); }

/// Maps an angle in degrees onto [-180, 180). Values already in range are
/// returned untouched and wrap_deg(-x) == -wrap_deg(x) holds bit-exactly away
/// from the +-180 seam.
inline double wrap_deg(double x) {
  if (x >= -180.0 && x < 180.0) return x;
  if (!std::isfinite(x)) return x;
  if (std::fabs(x) > 1e6) {
    double r = std::fmod(x + 180.0, 360.0);
    if (r < 0.0) r += 360.0;
    return r - 180.0;
  }
  while (x >= 180.0) x -= 360.0;
  while (x < -180.0) x += 360.0;
  return x;
}

/// Circular absolute difference in degrees, in [0, 180].
inline double angular_error(double pred_deg, double true_deg) {
  double d = std::fmod(std::fabs(pred_deg - true_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace binori
