#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "binori/signal.hpp"

namespace binori {

enum class TableKind { hrtf_left = 0, hrtf_right = 1, vdp = 2 };

const char* to_string(TableKind k);

/// Azimuth-indexed complex frequency responses, shared by per-ear HRTFs and
/// speaker voice-directivity patterns. Immutable after construction.
class DirectivityTable {
 public:
  DirectivityTable(TableKind kind, std::vector<double> azimuths_deg,
                   std::vector<std::vector<Complex>> responses, double bin_hz,
                   double reference_distance_m);

  TableKind kind() const { return kind_; }
  const std::vector<double>& azimuths() const { return azimuths_; }
  std::size_t size() const { return azimuths_.size(); }
  std::size_t bins() const { return bins_; }
  double bin_hz() const { return bin_hz_; }
  double reference_distance() const { return reference_distance_; }
  std::span<const Complex> row(std::size_t i) const { return responses_[i]; }
  std::span<const double> magnitude(std::size_t i) const { return magnitudes_[i]; }
  /// Phase unwrapped along frequency.
  std::span<const double> phase(std::size_t i) const { return phases_[i]; }

  bool operator==(const DirectivityTable& o) const {
    return kind_ == o.kind_ && azimuths_ == o.azimuths_ && responses_ == o.responses_ &&
           bin_hz_ == o.bin_hz_ && reference_distance_ == o.reference_distance_;
  }

 private:
  TableKind kind_;
  std::vector<double> azimuths_;
  std::vector<std::vector<Complex>> responses_;
  std::vector<std::vector<double>> magnitudes_;
  std::vector<std::vector<double>> phases_;
  std::size_t bins_ = 0;
  double bin_hz_ = 0.0;
  double reference_distance_ = 0.0;
};

/// Inputs of the rigid-sphere near-field model. ear_azimuth_deg places the
/// right ear (the left ear sits at the negated azimuth).
struct NearFieldParams {
  double head_radius_m = 0.09;
  double speed_of_sound_mps = 343.0;
  double reference_distance_m = 1.5;
  double ear_azimuth_deg = 100.0;

  void validate() const;
};

/// Response at azimuth (degrees, any range). Exact stored row on a grid hit,
/// otherwise per-bin linear interpolation of magnitude and of the
/// frequency-unwrapped phase between the two neighbouring azimuths.
Spectrum lookup(const DirectivityTable& table, double azimuth_deg);

/// Same interpolation as lookup, returned as raw bins.
std::vector<Complex> lookup_bins(const DirectivityTable& table, double azimuth_deg);

/// Resamples a response sampled every bin_hz onto out_bins bins spaced
/// out_bin_hz apart, interpolating magnitude and unwrapped phase linearly in
/// frequency. Frequencies past the last input bin hold its value.
std::vector<Complex> resample_response(std::span<const Complex> response, double bin_hz,
                                       std::size_t out_bins, double out_bin_hz);

/// Unwraps a phase sequence in place.
void unwrap_phase(std::span<double> phase);

// Rigid-sphere acoustics --------------------------------------------------------

/// Pressure on a rigid sphere of the given radius produced by a point source
/// at source_distance_m, relative to the free-field pressure the same source
/// would produce at the sphere centre. incidence_rad is the angle between the
/// source direction and the receiving point (0 = facing the source). Returned
/// with the e^{-j 2 pi f t} delay convention used by fft().
Complex sphere_response(double freq_hz, double incidence_rad, double source_distance_m,
                        double radius_m, double speed_of_sound_mps);

/// Plane-wave limit of sphere_response.
Complex sphere_response_plane(double freq_hz, double incidence_rad, double radius_m,
                              double speed_of_sound_mps);

/// Distance variation function: sphere response at target distance divided by
/// the response at the reference distance. Exactly 1 when the distances match.
Complex distance_variation(double freq_hz, double incidence_rad, double target_distance_m,
                           const NearFieldParams& params);

/// Distance variation function on a regular bin grid (bin k at k * bin_hz)
/// for several incidence angles at once; one row per incidence.
std::vector<std::vector<Complex>> distance_variation_rows(std::size_t bins, double bin_hz,
                                                          std::span<const double> incidences_rad,
                                                          double target_distance_m,
                                                          const NearFieldParams& params);

/// Angle between the source azimuth and the ear of the given table kind, in
/// radians, in [0, pi].
double ear_incidence_rad(TableKind ear, double source_azimuth_deg, const NearFieldParams& params);

/// Applies the distance variation function to every row of an HRTF table.
/// At the reference distance the input is returned unchanged.
DirectivityTable near_field_correct(const DirectivityTable& table, const NearFieldParams& params,
                                    double target_distance_m);

// Synthetic substitutes for measured data ---------------------------------------

/// Per-ear pinna shading: sources behind the pinna axis lose high frequencies.
struct PinnaModel {
  double strength = 0.5;     // HF loss fraction directly behind the pinna, [0, 1)
  double axis_deg = 50.0;    // right-pinna facing azimuth
  double full_effect_hz = 8000.0;
};

/// Analytic rigid-sphere HRTF pair (point source at the reference distance)
/// with pinna shading. left(theta) == right(-theta) bit-exactly.
std::pair<DirectivityTable, DirectivityTable> synth_hrtf(const NearFieldParams& params,
                                                         double grid_step_deg,
                                                         std::size_t bins, double bin_hz,
                                                         const PinnaModel& pinna = {});

/// Frequency-dependent cardioid family g = (1 - a) + a (1 + cos theta) / 2
/// with a(f) = strength * min(1, f / 8000). strength must lie in [0, 1).
DirectivityTable synth_vdp(double directivity_strength, std::size_t bins, double bin_hz,
                           double grid_step_deg = 5.0);

/// Table of unit responses (an acoustically transparent ear or speaker).
DirectivityTable identity_table(TableKind kind, std::size_t bins, double bin_hz,
                                double grid_step_deg = 5.0, double reference_distance_m = 1.5);

// Container format --------------------------------------------------------------

/// Writes the binary "DIRT" container and, when sidecar is non-empty, a
/// key=value metadata file.
void write_table(const std::string& path, const DirectivityTable& table,
                 const std::map<std::string, std::string>& sidecar = {});
DirectivityTable read_table(const std::string& path);
std::map<std::string, std::string> read_sidecar(const std::string& path);
void write_sidecar(const std::string& path, const std::map<std::string, std::string>& kv);

}  // namespace binori
