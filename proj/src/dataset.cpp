#include "binori/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <type_traits>
#include <iomanip>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "binori/error.hpp"
#include "binori/random.hpp"
#include "binori/renderer.hpp"

namespace binori {

using nlohmann::json;

void PoolSpec::validate() const {
  require(hrtf_count > 0 && vdp_count > 0 && source_count > 0, ErrorCode::invalid_input, "pools must be nonempty");
  require(head_radius_m.lo > 0.05 && head_radius_m.hi < 0.15 && head_radius_m.lo <= head_radius_m.hi,
          ErrorCode::invalid_input, "head radius range out of bounds");
  require(vdp_strength.lo >= 0.0 && vdp_strength.hi < 1.0 && vdp_strength.lo <= vdp_strength.hi,
          ErrorCode::invalid_input, "VDP strength must lie in [0, 1)");
  require(f0_hz.lo >= 80.0 && f0_hz.hi <= 300.0 && f0_hz.lo <= f0_hz.hi, ErrorCode::invalid_input,
          "f0 range must lie in [80, 300] Hz");
  require(duration_s > 0.0 && sample_rate > 0.0 && table_bins >= 2, ErrorCode::invalid_input,
          "bad pool signal parameters");
}

HrtfSubject make_subject(const NearFieldParams& params, const PinnaModel& pinna, const PoolSpec& spec) {
  auto [l, r] = synth_hrtf(params, spec.grid_step_deg, spec.table_bins, spec.table_bin_hz(), pinna);
  return HrtfSubject{params, std::move(l), std::move(r)};
}

namespace {

// Separate streams per pool kind and member.
std::uint64_t member_seed(std::uint64_t seed, std::uint64_t kind, std::uint64_t index) {
  std::uint64_t z = seed ^ (kind * 0x9E3779B97F4A7C15ull) ^ (index * 0xBF58476D1CE4E5B9ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Pools build_pools(const PoolSpec& spec) {
  spec.validate();
  Pools p;
  p.hrtfs.reserve(spec.hrtf_count);
  for (std::size_t i = 0; i < spec.hrtf_count; ++i) {
    Rng rng(member_seed(spec.seed, 1, i));
    NearFieldParams nf;
    nf.head_radius_m = spec.head_radius_m.draw(rng);
    nf.ear_azimuth_deg = spec.ear_azimuth_deg.draw(rng);
    PinnaModel pinna;
    pinna.strength = spec.pinna_strength.draw(rng);
    pinna.axis_deg = spec.pinna_axis_deg.draw(rng);
    p.hrtfs.push_back(make_subject(nf, pinna, spec));
  }
  for (std::size_t i = 0; i < spec.vdp_count; ++i) {
    Rng rng(member_seed(spec.seed, 2, i));
    p.vdps.push_back(synth_vdp(spec.vdp_strength.draw(rng), spec.table_bins, spec.table_bin_hz(),
                               spec.grid_step_deg));
  }
  SpeechConfig sc;
  sc.sample_rate = spec.sample_rate;
  sc.unvoiced_segments = spec.unvoiced_segments;
  for (std::size_t i = 0; i < spec.source_count; ++i) {
    Rng rng(member_seed(spec.seed, 3, i));
    const double f0 = spec.f0_hz.draw(rng);
    p.sources.push_back(synth_speech(spec.duration_s, f0, rng.bits(), sc));
    p.source_f0_hz.push_back(f0);
  }
  return p;
}

Pools select(const Pools& pools, const std::vector<std::size_t>& hrtfs, const std::vector<std::size_t>& vdps,
             const std::vector<std::size_t>& sources) {
  auto pick = [](const auto& v, const std::vector<std::size_t>& idx) {
    std::remove_cvref_t<decltype(v)> out;
    if (idx.empty()) return v;
    for (std::size_t i : idx) {
      require(i < v.size(), ErrorCode::invalid_input, "pool member index out of range");
      out.push_back(v[i]);
    }
    return out;
  };
  Pools out{pick(pools.hrtfs, hrtfs), pick(pools.vdps, vdps), pick(pools.sources, sources), {}};
  if (!pools.source_f0_hz.empty()) out.source_f0_hz = pick(pools.source_f0_hz, sources);
  return out;
}

void DatasetSpec::validate() const {
  require(count > 0, ErrorCode::invalid_input, "sample count must be positive");
  require(r_m.lo > 0.0 && r_m.lo <= r_m.hi, ErrorCode::invalid_input, "bad distance range");
  require(h_m == 0.0 || (h_m > 0.1 && h_m < 0.3), ErrorCode::invalid_input, "head width must lie in (0.1, 0.3)");
  pools.validate();
}

FeatureConfig harness_features() {
  FeatureConfig f;
  f.floor.window_hz = 500.0;
  return f;
}

// JSON ----------------------------------------------------------------------------

namespace {

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

void read_range(const json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_number()) {
    r.lo = r.hi = v.get<double>();
    return;
  }
  require(v.is_array() && v.size() == 2, ErrorCode::invalid_input, std::string(key) + " must be [lo, hi]");
  r.lo = v[0].get<double>();
  r.hi = v[1].get<double>();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
    require(v.is_number_unsigned(), ErrorCode::invalid_input,
            std::string("\"") + key + "\" must be a non-negative integer");
  out = v.get<T>();
}

json nf_json(const NearFieldParams& p) {
  return {{"head_radius_m", p.head_radius_m},
          {"speed_of_sound_mps", p.speed_of_sound_mps},
          {"reference_distance_m", p.reference_distance_m},
          {"ear_azimuth_deg", p.ear_azimuth_deg}};
}

NearFieldParams nf_from(const json& j) {
  NearFieldParams p;
  read(j, "head_radius_m", p.head_radius_m);
  read(j, "speed_of_sound_mps", p.speed_of_sound_mps);
  read(j, "reference_distance_m", p.reference_distance_m);
  read(j, "ear_azimuth_deg", p.ear_azimuth_deg);
  return p;
}

const char* mode_name(FeatureMode m) { return m == FeatureMode::whole_utterance ? "whole" : "frame"; }
const char* ratio_name(RatioMode m) { return m == RatioMode::convolution ? "convolution" : "energy"; }

}  // namespace

std::string to_json(const DatasetSpec& s) {
  json pools = {{"hrtf_count", s.pools.hrtf_count},
                {"head_radius_m", range_json(s.pools.head_radius_m)},
                {"ear_azimuth_deg", range_json(s.pools.ear_azimuth_deg)},
                {"pinna_strength", range_json(s.pools.pinna_strength)},
                {"pinna_axis_deg", range_json(s.pools.pinna_axis_deg)},
                {"vdp_count", s.pools.vdp_count},
                {"vdp_strength", range_json(s.pools.vdp_strength)},
                {"source_count", s.pools.source_count},
                {"f0_hz", range_json(s.pools.f0_hz)},
                {"duration_s", s.pools.duration_s},
                {"unvoiced_segments", s.pools.unvoiced_segments},
                {"sample_rate", s.pools.sample_rate},
                {"grid_step_deg", s.pools.grid_step_deg},
                {"table_bins", s.pools.table_bins},
                {"seed", s.pools.seed}};
  json features = {{"length", s.features.length},
                   {"speed_of_sound_mps", s.features.speed_of_sound_mps},
                   {"mode", mode_name(s.features.mode)},
                   {"ratio", ratio_name(s.features.ratio)},
                   {"ratio_epsilon_db", s.features.ratio_epsilon_db},
                   {"floor_factor", s.features.floor.factor},
                   {"floor_window_hz", s.features.floor.window_hz},
                   {"frame_len", s.features.frame_len},
                   {"hop", s.features.hop}};
  json pre = {{"voicing_threshold", s.preprocess.voicing_threshold},
              {"ramp_ms", s.preprocess.ramp_ms},
              {"frame_len", s.preprocess.voicing.frame_len},
              {"hop", s.preprocess.voicing.hop}};
  json j = {{"count", s.count},
            {"seed", s.seed},
            {"r_m", range_json(s.r_m)},
            {"h_m", s.h_m},
            {"near_field", s.near_field},
            {"threads", s.threads},
            {"pools", pools},
            {"features", features},
            {"preprocess", pre},
            {"hrtf_members", s.hrtf_members},
            {"vdp_members", s.vdp_members},
            {"source_members", s.source_members}};
  if (!s.hrtf_files.empty()) {
    json arr = json::array();
    for (const auto& f : s.hrtf_files) arr.push_back({{"left", f.left}, {"right", f.right}, {"near_field", nf_json(f.params)}});
    j["hrtf_files"] = arr;
  }
  if (!s.vdp_files.empty()) j["vdp_files"] = s.vdp_files;
  if (!s.source_dir.empty()) j["source_dir"] = s.source_dir;
  return j.dump(2);
}

DatasetSpec dataset_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("dataset spec is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::invalid_input, "dataset spec must be a JSON object");
  DatasetSpec s;
  s.features = harness_features();
  try {
    read(j, "count", s.count);
    read(j, "seed", s.seed);
    read_range(j, "r_m", s.r_m);
    read(j, "h_m", s.h_m);
    read(j, "near_field", s.near_field);
    read(j, "threads", s.threads);
    read(j, "hrtf_members", s.hrtf_members);
    read(j, "vdp_members", s.vdp_members);
    read(j, "source_members", s.source_members);
    if (j.contains("pools")) {
      const json& p = j.at("pools");
      read(p, "hrtf_count", s.pools.hrtf_count);
      read_range(p, "head_radius_m", s.pools.head_radius_m);
      read_range(p, "ear_azimuth_deg", s.pools.ear_azimuth_deg);
      read_range(p, "pinna_strength", s.pools.pinna_strength);
      read_range(p, "pinna_axis_deg", s.pools.pinna_axis_deg);
      read(p, "vdp_count", s.pools.vdp_count);
      read_range(p, "vdp_strength", s.pools.vdp_strength);
      read(p, "source_count", s.pools.source_count);
      read_range(p, "f0_hz", s.pools.f0_hz);
      read(p, "duration_s", s.pools.duration_s);
      read(p, "unvoiced_segments", s.pools.unvoiced_segments);
      read(p, "sample_rate", s.pools.sample_rate);
      read(p, "grid_step_deg", s.pools.grid_step_deg);
      read(p, "table_bins", s.pools.table_bins);
      read(p, "seed", s.pools.seed);
    }
    if (j.contains("features")) {
      const json& f = j.at("features");
      read(f, "length", s.features.length);
      read(f, "speed_of_sound_mps", s.features.speed_of_sound_mps);
      if (f.contains("mode")) {
        const auto m = f.at("mode").get<std::string>();
        require(m == "whole" || m == "frame", ErrorCode::invalid_input, "features.mode must be whole or frame");
        s.features.mode = m == "whole" ? FeatureMode::whole_utterance : FeatureMode::frame_average;
      }
      if (f.contains("ratio")) {
        const auto m = f.at("ratio").get<std::string>();
        require(m == "convolution" || m == "energy", ErrorCode::invalid_input,
                "features.ratio must be convolution or energy");
        s.features.ratio = m == "convolution" ? RatioMode::convolution : RatioMode::energy_ratio;
      }
      read(f, "ratio_epsilon_db", s.features.ratio_epsilon_db);
      read(f, "floor_factor", s.features.floor.factor);
      read(f, "floor_window_hz", s.features.floor.window_hz);
      read(f, "frame_len", s.features.frame_len);
      read(f, "hop", s.features.hop);
    }
    if (j.contains("preprocess")) {
      const json& p = j.at("preprocess");
      read(p, "voicing_threshold", s.preprocess.voicing_threshold);
      read(p, "ramp_ms", s.preprocess.ramp_ms);
      read(p, "frame_len", s.preprocess.voicing.frame_len);
      read(p, "hop", s.preprocess.voicing.hop);
    }
    if (j.contains("hrtf_files"))
      for (const json& f : j.at("hrtf_files"))
        s.hrtf_files.push_back({f.at("left").get<std::string>(), f.at("right").get<std::string>(),
                                nf_from(f.value("near_field", json::object()))});
    read(j, "vdp_files", s.vdp_files);
    read(j, "source_dir", s.source_dir);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("dataset spec: ") + e.what());
  }
  s.validate();
  return s;
}

// Generation ------------------------------------------------------------------------

Pools resolve_pools(const DatasetSpec& spec) {
  Pools base;
  const bool synth_needed = spec.hrtf_files.empty() || spec.vdp_files.empty() || spec.source_dir.empty();
  if (synth_needed) base = build_pools(spec.pools);
  if (!spec.hrtf_files.empty()) {
    base.hrtfs.clear();
    for (const auto& f : spec.hrtf_files) {
      DirectivityTable l = read_table(f.left), r = read_table(f.right);
      require(l.kind() == TableKind::hrtf_left && r.kind() == TableKind::hrtf_right, ErrorCode::invalid_input,
              "HRTF files must hold a left and a right table");
      NearFieldParams p = f.params;
      p.reference_distance_m = l.reference_distance();
      base.hrtfs.push_back(HrtfSubject{p, std::move(l), std::move(r)});
    }
  }
  if (!spec.vdp_files.empty()) {
    base.vdps.clear();
    for (const auto& f : spec.vdp_files) {
      DirectivityTable t = read_table(f);
      require(t.kind() == TableKind::vdp, ErrorCode::invalid_input, f + ": not a VDP table");
      base.vdps.push_back(std::move(t));
    }
  }
  if (!spec.source_dir.empty()) {
    base.sources = load_source_directory(spec.source_dir, spec.pools.sample_rate);
    base.source_f0_hz.clear();
  }
  Pools out = select(base, spec.hrtf_members, spec.vdp_members, spec.source_members);
  require(!out.hrtfs.empty() && !out.vdps.empty() && !out.sources.empty(), ErrorCode::invalid_input,
          "pools must be nonempty");
  return out;
}

SampleMeta draw_scene(const DatasetSpec& spec, const Pools& pools, std::size_t index) {
  require(!pools.hrtfs.empty() && !pools.vdps.empty() && !pools.sources.empty(), ErrorCode::invalid_input,
          "pools must be nonempty");
  Rng rng(spec.seed ^ static_cast<std::uint64_t>(index));
  SampleMeta m;
  m.hrtf = rng.index(pools.hrtfs.size());
  m.vdp = rng.index(pools.vdps.size());
  m.source = rng.index(pools.sources.size());
  m.theta_dir_deg = rng.uniform(-180.0, 180.0);
  m.theta_ori_deg = rng.uniform(-180.0, 180.0);
  m.r_m = spec.r_m.draw(rng);
  m.h_m = spec.h_m > 0.0 ? spec.h_m : 2.0 * pools.hrtfs[m.hrtf].params.head_radius_m;
  return m;
}

FeatureTensor featurize_scene(const SampleMeta& scene, const Pools& pools, bool near_field,
                              const FeatureConfig& features, const PreprocessConfig& preprocess) {
  const HrtfSubject& subject = pools.hrtfs.at(scene.hrtf);
  const SceneGeometry geom{scene.theta_dir_deg, scene.theta_ori_deg, scene.r_m, scene.h_m};
  const AudioBuffer& src = pools.sources.at(scene.source);
  const DirectivityTable& vdp = pools.vdps.at(scene.vdp);
  BinauralRecording rec = near_field ? render(src, geom, subject.left, subject.right, vdp, subject.params)
                                     : render_far_field(src, geom, subject.left, subject.right, vdp);
  return assemble(binori::preprocess(rec, preprocess), features);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || stop.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

Dataset generate_dataset(const DatasetSpec& spec, const Pools& pools) {
  spec.validate();
  Dataset d;
  d.batch.length = spec.features.length;
  d.meta.resize(spec.count);
  const std::size_t per = kFeatureChannels * spec.features.length;
  d.batch.data.assign(spec.count * per, 0.0f);
  d.batch.labels.resize(spec.count);
  parallel_for(spec.count, spec.threads, [&](std::size_t i) {
    const SampleMeta m = draw_scene(spec, pools, i);
    const auto flat = flatten(featurize_scene(m, pools, spec.near_field, spec.features, spec.preprocess));
    std::copy(flat.begin(), flat.end(), d.batch.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    d.batch.labels[i] = {m.theta_dir_deg, m.theta_ori_deg};
    d.meta[i] = m;
  });
  return d;
}

Dataset generate_dataset(const DatasetSpec& spec) { return generate_dataset(spec, resolve_pools(spec)); }

void write_labels(const std::string& path, const std::vector<SampleMeta>& meta) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << "index,theta_dir_deg,theta_ori_deg,r_m,h_m,hrtf,vdp,source\n";
  f << std::setprecision(17);
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const auto& m = meta[i];
    f << i << ',' << m.theta_dir_deg << ',' << m.theta_ori_deg << ',' << m.r_m << ',' << m.h_m << ',' << m.hrtf
      << ',' << m.vdp << ',' << m.source << '\n';
  }
  require(f.good(), ErrorCode::io, "failed writing " + path);
}

}  // namespace binori
