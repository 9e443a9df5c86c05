#pragma once

#include <functional>
#include <map>
#include <string>

#include "binori/dataset.hpp"
#include "binori/evaluation.hpp"

namespace binori {

struct ExperimentConfig {
  PoolSpec pools;
  std::size_t train_count = 20000;
  std::size_t test_count = 2000;
  /// Hold out the last test_hrtfs / test_vdps / test_sources pool members for
  /// testing; otherwise train and test draw from the whole pool.
  bool subject_disjoint = true;
  std::size_t test_hrtfs = 2, test_vdps = 2, test_sources = 16;
  TrainConfig train;
  FeatureConfig features = harness_features();
  PreprocessConfig preprocess;
  FacingConfig facing;
  Range r_m{0.5, 1.5};
  // Held-out listener: head radius scaled and ears moved relative to the
  // pool's mid-range subject.
  double heldout_radius_scale = 1.08;
  double heldout_ear_offset_deg = 5.0;
  std::size_t finetune_count = 1000;
  std::size_t finetune_epochs = 5;
  std::size_t unknown_test_count = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 0;

  void validate() const;
};

std::string to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& json_text);

struct ExperimentResult {
  std::map<std::string, EvalReport> reports;
  std::map<std::string, std::vector<double>> train_loss;
};

using ExperimentLog = std::function<void(const std::string&)>;

/// Named protocols:
///   main                  train near-field, test on held-out scenes
///   near-vs-far           main plus the same training scenes rendered far-field
///   known-vs-unknown-hrtf main model on a held-out listener, then fine-tuned on it
///   all                   every report above, sharing the main model
/// Report keys: main, near_field, far_field, unknown_hrtf, known_hrtf. Test
/// sets are always rendered with the near-field model. When out_dir is not
/// empty every report is written there with its key as file prefix, plus
/// summary.json.
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg,
                                 const std::string& out_dir = {}, const ExperimentLog& log = {});

/// Seed of a derived stream (dataset or training run) of an experiment.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace binori
