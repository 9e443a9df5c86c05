#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "binori/directivity.hpp"
#include "binori/features.hpp"
#include "binori/preprocess.hpp"
#include "binori/random.hpp"
#include "binori/speech.hpp"

namespace binori {

/// One listener: near-field parameters (head radius, ear placement) and the
/// HRTF pair measured at params.reference_distance_m.
struct HrtfSubject {
  NearFieldParams params;
  DirectivityTable left;
  DirectivityTable right;
};

struct Pools {
  std::vector<HrtfSubject> hrtfs;
  std::vector<DirectivityTable> vdps;
  std::vector<AudioBuffer> sources;
  std::vector<double> source_f0_hz;  // empty for loaded sources
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double draw(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

/// Synthetic pool recipe. Each subject and source is drawn from its own
/// seeded stream, so growing a pool keeps the existing members.
struct PoolSpec {
  std::size_t hrtf_count = 6;
  Range head_radius_m{0.085, 0.095};
  Range ear_azimuth_deg{97.0, 103.0};
  Range pinna_strength{0.4, 0.6};
  Range pinna_axis_deg{45.0, 55.0};
  std::size_t vdp_count = 6;
  Range vdp_strength{0.5, 0.9};
  std::size_t source_count = 48;
  Range f0_hz{90.0, 250.0};
  double duration_s = 1.0;
  bool unvoiced_segments = true;
  double sample_rate = kDefaultSampleRate;
  double grid_step_deg = 5.0;
  std::size_t table_bins = 257;
  std::uint64_t seed = 1;

  double table_bin_hz() const { return sample_rate / (2.0 * static_cast<double>(table_bins - 1)); }
  void validate() const;
};

Pools build_pools(const PoolSpec& spec);
HrtfSubject make_subject(const NearFieldParams& params, const PinnaModel& pinna, const PoolSpec& spec);

/// Restricts pools to the given member indices (empty list = keep all).
Pools select(const Pools& pools, const std::vector<std::size_t>& hrtfs, const std::vector<std::size_t>& vdps,
             const std::vector<std::size_t>& sources);

struct SampleMeta {
  double theta_dir_deg = 0.0;
  double theta_ori_deg = 0.0;
  double r_m = 0.0;
  double h_m = 0.0;
  std::size_t hrtf = 0, vdp = 0, source = 0;
};

struct DatasetSpec {
  std::size_t count = 1000;
  std::uint64_t seed = 1;
  Range r_m{0.5, 1.5};
  double h_m = 0.0;  // 0: twice the chosen subject's head radius
  bool near_field = true;
  FeatureConfig features;
  PreprocessConfig preprocess;
  std::size_t threads = 0;  // 0: hardware concurrency

  // Pool members the samples draw from (empty = all).
  PoolSpec pools;
  std::vector<std::size_t> hrtf_members, vdp_members, source_members;
  // Table files override the synthetic HRTF/VDP pools; a directory of WAV
  // files overrides the synthetic sources.
  struct HrtfFiles {
    std::string left, right;
    NearFieldParams params;
  };
  std::vector<HrtfFiles> hrtf_files;
  std::vector<std::string> vdp_files;
  std::string source_dir;

  void validate() const;
};

std::string to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const std::string& json_text);
/// Default feature configuration used by the harness: whole utterance with a
/// 500 Hz local spectral floor.
FeatureConfig harness_features();

struct Dataset {
  FeatureBatch batch;
  std::vector<SampleMeta> meta;
};

/// Pools described by the spec (files or synthetic) after member selection.
Pools resolve_pools(const DatasetSpec& spec);

/// Draws one scene per sample from the stream seeded with seed ^ index,
/// renders it (near- or far-field), preprocesses and featurizes it. Samples
/// are computed in parallel into fixed slots, so the result does not depend
/// on the thread count.
Dataset generate_dataset(const DatasetSpec& spec, const Pools& pools);
Dataset generate_dataset(const DatasetSpec& spec);

/// Scene drawn for sample `index` (what generate_dataset renders).
SampleMeta draw_scene(const DatasetSpec& spec, const Pools& pools, std::size_t index);

/// Renders, preprocesses and featurizes one scene.
FeatureTensor featurize_scene(const SampleMeta& scene, const Pools& pools, bool near_field,
                              const FeatureConfig& features, const PreprocessConfig& preprocess);

/// CSV with one row per sample: index, angles, r, h, pool member indices.
void write_labels(const std::string& path, const std::vector<SampleMeta>& meta);

/// Runs fn(i) for i in [0, n) on `threads` workers (0 = hardware concurrency).
/// The first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace binori
