#pragma once

#include <utility>

namespace binori {

/// Speaker/listener layout in the listener's horizontal plane. theta_dir > 0
/// places the speaker toward the listener's right ear.
struct SceneGeometry {
  double theta_dir_deg = 0.0;
  double theta_ori_deg = 0.0;
  double r_m = 1.0;  // speaker-listener centre distance
  double h_m = 0.18; // listener head width

  /// Throws invalid_geometry when r is outside [0.2, 1e7], h outside
  /// (0.1, 0.3), r <= h, or an angle is not finite.
  void validate() const;

  /// Angular offset subtended at the speaker by half the head width.
  double alpha_deg() const;
  /// Offset toward the ipsilateral ear; uses |theta_dir| so mirrored scenes
  /// produce identical values.
  double beta_deg() const;
};

/// VDP evaluation angles (left ear, right ear), each wrapped to [-180, 180).
/// Right-ipsilateral scenes (theta_dir >= 0) give (ori - alpha, ori + beta);
/// left-ipsilateral scenes are the mirror image: (ori - beta, ori + alpha).
/// For sources behind the listener (|theta_dir| > 90) alpha enters with the
/// opposite sign, as beta does through cos(theta_dir).
std::pair<double, double> parallax_adjust(const SceneGeometry& geom);

}  // namespace binori
