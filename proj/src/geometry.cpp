#include "binori/geometry.hpp"

#include <cmath>

#include "binori/angles.hpp"
#include "binori/error.hpp"

namespace binori {

void SceneGeometry::validate() const {
  require(std::isfinite(theta_dir_deg) && std::isfinite(theta_ori_deg), ErrorCode::invalid_geometry,
          "scene angles must be finite");
  require(r_m >= 0.2 && r_m <= 1e7, ErrorCode::invalid_geometry, "distance r must lie in [0.2, 1e7] m");
  require(h_m > 0.1 && h_m < 0.3, ErrorCode::invalid_geometry, "head width h must lie in (0.1, 0.3) m");
  require(r_m > h_m, ErrorCode::invalid_geometry, "distance must exceed head width");
}

double SceneGeometry::alpha_deg() const {
  return rad2deg(std::asin((h_m / 2.0) / r_m));
}

double SceneGeometry::beta_deg() const {
  const double t = deg2rad(std::fabs(wrap_deg(theta_dir_deg)));
  return rad2deg(std::atan((h_m * std::cos(t) / 2.0) / (r_m - h_m * std::sin(t) / 2.0)));
}

std::pair<double, double> parallax_adjust(const SceneGeometry& geom) {
  geom.validate();
  const double ori = wrap_deg(geom.theta_ori_deg);
  const double dir = wrap_deg(geom.theta_dir_deg);
  // Behind the listener alpha changes sign.
  const double a = std::fabs(dir) > 90.0 ? -geom.alpha_deg() : geom.alpha_deg();
  const double b = geom.beta_deg();
  if (!std::signbit(dir))
    return {wrap_deg(ori - a), wrap_deg(ori + b)};
  return {wrap_deg(ori - b), wrap_deg(ori + a)};
}

}  // namespace binori
