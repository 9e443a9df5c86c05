#include "binori/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <type_traits>
#include <numeric>
#include <optional>

#include "json.hpp"

#include "binori/error.hpp"

namespace binori {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void ExperimentConfig::validate() const {
  pools.validate();
  train.validate();
  require(train_count > 0 && test_count > 0, ErrorCode::invalid_input, "sample counts must be positive");
  if (subject_disjoint)
    require(test_hrtfs < pools.hrtf_count && test_vdps < pools.vdp_count && test_sources < pools.source_count &&
                test_hrtfs > 0 && test_vdps > 0 && test_sources > 0,
            ErrorCode::invalid_input, "held-out test members must leave training members in every pool");
  require(heldout_radius_scale > 0.0, ErrorCode::invalid_input, "held-out radius scale must be positive");
}

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

std::vector<std::size_t> iota_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi - lo);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

}  // namespace

std::string to_json(const ExperimentConfig& c) {
  DatasetSpec d;
  d.pools = c.pools;
  d.features = c.features;
  d.preprocess = c.preprocess;
  json base = json::parse(to_json(d));
  json j = {{"pools", base["pools"]},
            {"features", base["features"]},
            {"preprocess", base["preprocess"]},
            {"train_count", c.train_count},
            {"test_count", c.test_count},
            {"subject_disjoint", c.subject_disjoint},
            {"test_hrtfs", c.test_hrtfs},
            {"test_vdps", c.test_vdps},
            {"test_sources", c.test_sources},
            {"r_m", range_json(c.r_m)},
            {"train",
             {{"batch_size", c.train.batch_size},
              {"learning_rate", c.train.learning_rate},
              {"epochs", c.train.epochs},
              {"dropout", c.train.dropout}}},
            {"facing", {{"sector_deg", c.facing.sector_deg}, {"half_width", c.facing.half_width}}},
            {"heldout_radius_scale", c.heldout_radius_scale},
            {"heldout_ear_offset_deg", c.heldout_ear_offset_deg},
            {"finetune_count", c.finetune_count},
            {"finetune_epochs", c.finetune_epochs},
            {"unknown_test_count", c.unknown_test_count},
            {"seed", c.seed},
            {"threads", c.threads}};
  return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("experiment config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::invalid_input, "experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    // Pool, feature and preprocessing blocks share the dataset spec format.
    json ds = json::object();
    for (const char* key : {"pools", "features", "preprocess"})
      if (j.contains(key)) ds[key] = j.at(key);
    const DatasetSpec d = dataset_spec_from_json(ds.dump());
    c.pools = d.pools;
    c.features = d.features;
    c.preprocess = d.preprocess;
    read(j, "train_count", c.train_count);
    read(j, "test_count", c.test_count);
    read(j, "subject_disjoint", c.subject_disjoint);
    read(j, "test_hrtfs", c.test_hrtfs);
    read(j, "test_vdps", c.test_vdps);
    read(j, "test_sources", c.test_sources);
    read_range(j, "r_m", c.r_m);
    if (j.contains("train")) {
      const json& t = j.at("train");
      read(t, "batch_size", c.train.batch_size);
      read(t, "learning_rate", c.train.learning_rate);
      read(t, "epochs", c.train.epochs);
      read(t, "dropout", c.train.dropout);
    }
    if (j.contains("facing")) {
      read(j.at("facing"), "sector_deg", c.facing.sector_deg);
      read(j.at("facing"), "half_width", c.facing.half_width);
    }
    read(j, "heldout_radius_scale", c.heldout_radius_scale);
    read(j, "heldout_ear_offset_deg", c.heldout_ear_offset_deg);
    read(j, "finetune_count", c.finetune_count);
    read(j, "finetune_epochs", c.finetune_epochs);
    read(j, "unknown_test_count", c.unknown_test_count);
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_input, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

enum Stream : std::uint64_t { train_data = 1, test_data, finetune_data, unknown_data, train_run, finetune_run };

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const ExperimentLog& log) : cfg_(cfg), log_(log) {
    say("building pools");
    pools_ = build_pools(cfg.pools);
    if (cfg.subject_disjoint) {
      train_pools_ = select(pools_, iota_range(0, cfg.pools.hrtf_count - cfg.test_hrtfs),
                            iota_range(0, cfg.pools.vdp_count - cfg.test_vdps),
                            iota_range(0, cfg.pools.source_count - cfg.test_sources));
      test_pools_ = select(pools_, iota_range(cfg.pools.hrtf_count - cfg.test_hrtfs, cfg.pools.hrtf_count),
                           iota_range(cfg.pools.vdp_count - cfg.test_vdps, cfg.pools.vdp_count),
                           iota_range(cfg.pools.source_count - cfg.test_sources, cfg.pools.source_count));
    } else {
      train_pools_ = pools_;
      test_pools_ = pools_;
    }
  }

  DatasetSpec spec(std::size_t count, Stream stream, bool near_field) const {
    DatasetSpec d;
    d.count = count;
    d.seed = derive_seed(cfg_.seed, stream);
    d.r_m = cfg_.r_m;
    d.near_field = near_field;
    d.features = cfg_.features;
    d.preprocess = cfg_.preprocess;
    d.threads = cfg_.threads;
    d.pools = cfg_.pools;
    return d;
  }

  const FeatureBatch& test_set() {
    if (!test_) {
      say("rendering test set");
      test_ = generate_dataset(spec(cfg_.test_count, test_data, true), test_pools_).batch;
    }
    return *test_;
  }

  EstimatorModel train_on(bool near_field, ExperimentResult& result, const std::string& key) {
    say(std::string("rendering training set (") + (near_field ? "near" : "far") + "-field)");
    const Dataset data = generate_dataset(spec(cfg_.train_count, train_data, near_field), train_pools_);
    TrainConfig tc = cfg_.train;
    tc.seed = derive_seed(cfg_.seed, train_run);
    TrainLog tl;
    say("training " + key);
    EstimatorModel m = train(data.batch, tc, default_architecture(cfg_.features.length), &tl, nullptr,
                             [&](std::size_t e, double l, const EstimatorModel&) {
                               say("  epoch " + std::to_string(e + 1) + " loss " + std::to_string(l));
                             });
    result.train_loss[key] = tl.epoch_loss;
    return m;
  }

  const EstimatorModel& near_model(ExperimentResult& result) {
    if (!near_) near_ = train_on(true, result, "near_field");
    return *near_;
  }

  Pools heldout_pools() const {
    NearFieldParams nf;
    nf.head_radius_m = 0.5 * (cfg_.pools.head_radius_m.lo + cfg_.pools.head_radius_m.hi) * cfg_.heldout_radius_scale;
    nf.ear_azimuth_deg =
        0.5 * (cfg_.pools.ear_azimuth_deg.lo + cfg_.pools.ear_azimuth_deg.hi) + cfg_.heldout_ear_offset_deg;
    PinnaModel pinna;
    pinna.strength = 0.5 * (cfg_.pools.pinna_strength.lo + cfg_.pools.pinna_strength.hi);
    pinna.axis_deg = 0.5 * (cfg_.pools.pinna_axis_deg.lo + cfg_.pools.pinna_axis_deg.hi);
    Pools p;
    p.hrtfs.push_back(make_subject(nf, pinna, cfg_.pools));
    return p;
  }

  void say(const std::string& s) const {
    if (log_) log_(s);
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  const Pools& train_pools() const { return train_pools_; }
  const Pools& test_pools() const { return test_pools_; }

 private:
  const ExperimentConfig& cfg_;
  ExperimentLog log_;
  Pools pools_, train_pools_, test_pools_;
  std::optional<FeatureBatch> test_;
  std::optional<EstimatorModel> near_;
};

}  // namespace

ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, const std::string& out_dir,
                                const ExperimentLog& log) {
  cfg.validate();
  const bool main = name == "main", nf = name == "near-vs-far", ku = name == "known-vs-unknown-hrtf",
             all = name == "all";
  require(main || nf || ku || all, ErrorCode::invalid_input,
          "unknown experiment '" + name + "' (main, near-vs-far, known-vs-unknown-hrtf, all)");
  ExperimentResult result;
  Runner run(cfg, log);

  const EstimatorModel& model = run.near_model(result);
  if (main || all) result.reports["main"] = evaluate(model, run.test_set(), cfg.facing);
  if (nf || all) {
    result.reports["near_field"] = evaluate(model, run.test_set(), cfg.facing);
    const EstimatorModel far = run.train_on(false, result, "far_field");
    result.reports["far_field"] = evaluate(far, run.test_set(), cfg.facing);
  }
  if (ku || all) {
    Pools held = run.heldout_pools();
    const Pools& tp = run.test_pools();
    const Pools& trp = run.train_pools();
    Pools unknown_test{held.hrtfs, tp.vdps, tp.sources, tp.source_f0_hz};
    Pools finetune{held.hrtfs, trp.vdps, trp.sources, trp.source_f0_hz};
    run.say("rendering held-out listener sets");
    const FeatureBatch test = generate_dataset(run.spec(cfg.unknown_test_count, unknown_data, true), unknown_test).batch;
    const FeatureBatch tune = generate_dataset(run.spec(cfg.finetune_count, finetune_data, true), finetune).batch;
    result.reports["unknown_hrtf"] = evaluate(model, test, cfg.facing);
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.finetune_epochs;
    tc.seed = derive_seed(cfg.seed, finetune_run);
    tc.resume = true;
    TrainLog tl;
    run.say("fine-tuning on the held-out listener");
    const EstimatorModel tuned = train(tune, tc, model.architecture(), &tl, &model);
    result.train_loss["known_hrtf"] = tl.epoch_loss;
    result.reports["known_hrtf"] = evaluate(tuned, test, cfg.facing);
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    json summary = json::object();
    for (const auto& [key, rep] : result.reports) {
      write_report((std::filesystem::path(out_dir) / (key + "_")).string(), rep);
      summary[key] = {{"theta_dir", {{"p50", rep.dir.p50}, {"p80", rep.dir.p80}, {"p90", rep.dir.p90}}},
                      {"theta_ori", {{"p50", rep.ori.p50}, {"p80", rep.ori.p80}, {"p90", rep.ori.p90}}}};
    }
    json losses = json::object();
    for (const auto& [key, l] : result.train_loss) losses[key] = l;
    summary["train_loss"] = losses;
    summary["config"] = json::parse(to_json(cfg));
    std::ofstream f((std::filesystem::path(out_dir) / "summary.json").string());
    require(f.good(), ErrorCode::io, "cannot write summary.json in " + out_dir);
    f << summary.dump(2) << '\n';
  }
  return result;
}

}  // namespace binori
