#include "binori/renderer.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"

#include "binori/angles.hpp"
#include "binori/error.hpp"

namespace binori {

namespace {

void check_tables(const AudioBuffer& source, const DirectivityTable& hrtf_l,
                  const DirectivityTable& hrtf_r, const DirectivityTable& vdp) {
  require(source.channels() == 1 && source.frames() >= 2, ErrorCode::invalid_input,
          "render expects a mono source of at least 2 samples");
  require(hrtf_l.kind() == TableKind::hrtf_left && hrtf_r.kind() == TableKind::hrtf_right &&
              vdp.kind() == TableKind::vdp,
          ErrorCode::invalid_input, "render expects (hrtf-left, hrtf-right, vdp) tables");
  const double nyquist = source.sample_rate() / 2.0;
  for (const DirectivityTable* t : {&hrtf_l, &hrtf_r, &vdp}) {
    const double top = t->bin_hz() * static_cast<double>(t->bins() - 1);
    require(std::fabs(top - nyquist) <= 1e-6 * nyquist, ErrorCode::invalid_input,
            "table bandwidth does not match the source sample rate");
  }
}

BinauralRecording render_impl(const AudioBuffer& source, const SceneGeometry& geom,
                              const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                              const DirectivityTable& vdp, const NearFieldParams* nf) {
  geom.validate();
  check_tables(source, hrtf_l, hrtf_r, vdp);

  const std::size_t len = source.frames();
  const std::size_t n = render_fft_length(len, hrtf_l);
  std::vector<double> padded(n, 0.0);
  std::copy(source.samples().begin(), source.samples().end(), padded.begin());
  const Spectrum x = fft(padded, source.sample_rate());

  const auto [hl, hr] = ear_transfer(geom, hrtf_l, hrtf_r, nf);
  double vl_deg = wrap_deg(geom.theta_ori_deg), vr_deg = vl_deg;
  if (nf) std::tie(vl_deg, vr_deg) = parallax_adjust(geom);
  const auto vl = lookup_bins(vdp, vl_deg);
  const auto vr = lookup_bins(vdp, vr_deg);

  const std::size_t bins = x.bins.size();
  const auto hl_f = resample_response(hl, hrtf_l.bin_hz(), bins, x.bin_hz);
  const auto hr_f = resample_response(hr, hrtf_r.bin_hz(), bins, x.bin_hz);
  const auto vl_f = resample_response(vl, vdp.bin_hz(), bins, x.bin_hz);
  const auto vr_f = resample_response(vr, vdp.bin_hz(), bins, x.bin_hz);

  Spectrum yl = x, yr = x;
  for (std::size_t k = 0; k < bins; ++k) {
    yl.bins[k] = x.bins[k] * (hl_f[k] * vl_f[k]);
    yr.bins[k] = x.bins[k] * (hr_f[k] * vr_f[k]);
  }
  auto left = ifft_samples(yl);
  auto right = ifft_samples(yr);
  left.resize(len);
  right.resize(len);

  BinauralRecording rec;
  rec.left = AudioBuffer(std::move(left), source.sample_rate(), 1);
  rec.right = AudioBuffer(std::move(right), source.sample_rate(), 1);
  rec.geometry = geom;
  rec.label_dir_deg = wrap_deg(geom.theta_dir_deg);
  rec.label_ori_deg = wrap_deg(geom.theta_ori_deg);
  return rec;
}

}  // namespace

std::size_t render_fft_length(std::size_t source_len, const DirectivityTable& hrtf) {
  return next_fast_length(source_len + 2 * (hrtf.bins() - 1));
}

std::pair<std::vector<Complex>, std::vector<Complex>> ear_transfer(
    const SceneGeometry& geom, const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
    const NearFieldParams* nf) {
  require(hrtf_l.bins() == hrtf_r.bins() && hrtf_l.bin_hz() == hrtf_r.bin_hz(),
          ErrorCode::invalid_input, "left and right HRTF tables must share a bin grid");
  auto hl = lookup_bins(hrtf_l, geom.theta_dir_deg);
  auto hr = lookup_bins(hrtf_r, geom.theta_dir_deg);
  if (nf) {
    nf->validate();
    const double inc[2] = {ear_incidence_rad(TableKind::hrtf_left, geom.theta_dir_deg, *nf),
                           ear_incidence_rad(TableKind::hrtf_right, geom.theta_dir_deg, *nf)};
    const auto dvf = distance_variation_rows(hrtf_l.bins(), hrtf_l.bin_hz(), inc, geom.r_m, *nf);
    for (std::size_t k = 0; k < hl.size(); ++k) {
      hl[k] *= dvf[0][k];
      hr[k] *= dvf[1][k];
    }
  }
  return {std::move(hl), std::move(hr)};
}

BinauralRecording render(const AudioBuffer& source, const SceneGeometry& geom,
                         const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                         const DirectivityTable& vdp, const NearFieldParams& nf) {
  return render_impl(source, geom, hrtf_l, hrtf_r, vdp, &nf);
}

BinauralRecording render_far_field(const AudioBuffer& source, const SceneGeometry& geom,
                                   const DirectivityTable& hrtf_l, const DirectivityTable& hrtf_r,
                                   const DirectivityTable& vdp) {
  return render_impl(source, geom, hrtf_l, hrtf_r, vdp, nullptr);
}

void write_recording(const std::string& wav_path, const BinauralRecording& rec, WavFormat format) {
  write_wav(wav_path, AudioBuffer::interleave(rec.left, rec.right), format);
  nlohmann::json j = {
      {"theta_dir_deg", rec.geometry.theta_dir_deg},
      {"theta_ori_deg", rec.geometry.theta_ori_deg},
      {"r_m", rec.geometry.r_m},
      {"h_m", rec.geometry.h_m},
      {"labels", {{"theta_dir_deg", rec.label_dir_deg}, {"theta_ori_deg", rec.label_ori_deg}}},
  };
  std::ofstream f(wav_path + ".json");
  require(f.good(), ErrorCode::io, "cannot write " + wav_path + ".json");
  f << j.dump(2) << '\n';
}

BinauralRecording read_recording(const std::string& wav_path) {
  const AudioBuffer stereo = read_wav(wav_path);
  require(stereo.channels() == 2, ErrorCode::format, wav_path + " is not a stereo recording");
  std::ifstream f(wav_path + ".json");
  require(f.good(), ErrorCode::io, "missing sidecar " + wav_path + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, wav_path + ".json: " + e.what());
  }
  BinauralRecording rec;
  rec.left = stereo.channel(0);
  rec.right = stereo.channel(1);
  rec.geometry.theta_dir_deg = j.at("theta_dir_deg").get<double>();
  rec.geometry.theta_ori_deg = j.at("theta_ori_deg").get<double>();
  rec.geometry.r_m = j.at("r_m").get<double>();
  rec.geometry.h_m = j.at("h_m").get<double>();
  rec.label_dir_deg = j.at("labels").at("theta_dir_deg").get<double>();
  rec.label_ori_deg = j.at("labels").at("theta_ori_deg").get<double>();
  return rec;
}

}  // namespace binori
