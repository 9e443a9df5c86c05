#pragma once

#include <string>

#include "binori/directivity.hpp"
#include "binori/geometry.hpp"
#include "binori/signal.hpp"

namespace binori {

struct BinauralRecording {
  AudioBuffer left;
  AudioBuffer right;
  SceneGeometry geometry;
  double label_dir_deg = 0.0;
  double label_ori_deg = 0.0;
};

/// Binaural pair Y_l = X H_l V(left angle), Y_r = X H_r V(right angle).
/// The HRTFs are looked up at theta_dir and multiplied by the rigid-sphere
/// distance variation function for each ear; the VDP is read at the
/// parallax-adjusted angles. The product is applied by zero-padded FFT
/// multiplication and the output is cut back to the source length.
/// The source is used as given (callers normalise level).
BinauralRecording render(const AudioBuffer& source, const SceneGeometry& geom,
                         const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                         const DirectivityTable& vdp, const NearFieldParams& nf);

/// render() with the distance variation function fixed to 1 and both VDP
/// angles equal to theta_ori.
BinauralRecording render_far_field(const AudioBuffer& source, const SceneGeometry& geom,
                                   const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                                   const DirectivityTable& vdp);

/// Transform length used for a source of source_len samples: the source plus
/// the HRTF impulse length, rounded up to a 2-3-5 smooth size.
std::size_t render_fft_length(std::size_t source_len, const DirectivityTable& hrtf);

/// Per-ear composite transfer functions on the HRTF table's bin grid, before
/// resampling: (H_l * DVF_l, H_r * DVF_r).
std::pair<std::vector<Complex>, std::vector<Complex>> ear_transfer(
    const SceneGeometry& geom, const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
    const NearFieldParams* nf);

/// Stereo WAV (left, right) plus "<path>.json" with geometry and labels.
void write_recording(const std::string& wav_path, const BinauralRecording& rec,
                     WavFormat format = WavFormat::float32);
BinauralRecording read_recording(const std::string& wav_path);

}  // namespace binori
