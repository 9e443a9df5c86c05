#include "binori/binori.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"

#include "binori/dataset.hpp"
#include "binori/error.hpp"
#include "binori/evaluation.hpp"
#include "binori/experiment.hpp"
#include "binori/renderer.hpp"

struct binori_table {
  binori::DirectivityTable value;
};
struct binori_batch {
  binori::FeatureBatch value;
};
struct binori_model {
  binori::EstimatorModel value;
};
struct binori_report {
  binori::EvalReport value;
};

namespace {

thread_local std::string last_error;

template <typename F>
binori_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return BINORI_OK;
  } catch (const binori::Error& e) {
    last_error = e.what();
    return static_cast<binori_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return BINORI_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  binori::require(p != nullptr, binori::ErrorCode::invalid_input, std::string(what) + " must not be NULL");
}

binori::NearFieldParams to_cpp(const binori_near_field& p) {
  binori::NearFieldParams nf;
  nf.head_radius_m = p.head_radius_m;
  nf.speed_of_sound_mps = p.speed_of_sound_mps;
  nf.reference_distance_m = p.reference_distance_m;
  nf.ear_azimuth_deg = p.ear_azimuth_deg;
  return nf;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

}  // namespace

extern "C" {

const char* binori_version(void) { return "1.0.0"; }

const char* binori_last_error(void) { return last_error.c_str(); }

const char* binori_status_name(binori_status status) {
  switch (status) {
    case BINORI_OK: return "ok";
    case BINORI_ERR_INVALID_INPUT: return "invalid input";
    case BINORI_ERR_INVALID_GEOMETRY: return "invalid geometry";
    case BINORI_ERR_EMPTY_FEATURES: return "empty features";
    case BINORI_ERR_IO: return "i/o error";
    case BINORI_ERR_FORMAT: return "format error";
    case BINORI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void binori_string_free(char* s) { std::free(s); }

void binori_near_field_default(binori_near_field* out) {
  if (!out) return;
  const binori::NearFieldParams d;
  *out = {d.head_radius_m, d.speed_of_sound_mps, d.reference_distance_m, d.ear_azimuth_deg};
}

binori_status binori_synth_hrtf(const binori_near_field* params, double grid_step_deg, size_t bins, double bin_hz,
                                binori_table** left, binori_table** right) {
  return guard([&] {
    need(params, "params");
    need(left, "left");
    need(right, "right");
    auto [l, r] = binori::synth_hrtf(to_cpp(*params), grid_step_deg, bins, bin_hz);
    auto* lt = new binori_table{std::move(l)};
    *right = new binori_table{std::move(r)};
    *left = lt;
  });
}

binori_status binori_synth_vdp(double strength, size_t bins, double bin_hz, double grid_step_deg, binori_table** out) {
  return guard([&] {
    need(out, "out");
    *out = new binori_table{binori::synth_vdp(strength, bins, bin_hz, grid_step_deg)};
  });
}

binori_status binori_table_read(const char* path, binori_table** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new binori_table{binori::read_table(path)};
  });
}

binori_status binori_table_write(const binori_table* table, const char* path) {
  return guard([&] {
    need(table, "table");
    need(path, "path");
    binori::write_table(path, table->value);
  });
}

size_t binori_table_bins(const binori_table* table) { return table ? table->value.bins() : 0; }
double binori_table_bin_hz(const binori_table* table) { return table ? table->value.bin_hz() : 0.0; }
void binori_table_free(binori_table* table) { delete table; }

binori_status binori_write_pool_tables(const char* pool_json, const char* out_dir) {
  return guard([&] {
    need(out_dir, "out_dir");
    nlohmann::json wrapper = nlohmann::json::object();
    if (pool_json) {
      try {
        wrapper["pools"] = nlohmann::json::parse(pool_json);
      } catch (const nlohmann::json::exception& e) {
        binori::fail(binori::ErrorCode::invalid_input, std::string("pool spec is not valid JSON: ") + e.what());
      }
    }
    const binori::PoolSpec spec = binori::dataset_spec_from_json(wrapper.dump()).pools;
    const binori::Pools pools = binori::build_pools(spec);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    char name[64];
    for (std::size_t i = 0; i < pools.hrtfs.size(); ++i) {
      const auto& s = pools.hrtfs[i];
      const std::map<std::string, std::string> meta = {
          {"head_radius_m", fmt(s.params.head_radius_m)},
          {"ear_azimuth_deg", fmt(s.params.ear_azimuth_deg)},
          {"speed_of_sound_mps", fmt(s.params.speed_of_sound_mps)},
          {"source", "synthetic rigid sphere"}};
      std::snprintf(name, sizeof name, "hrtf_%03zu_left.dirt", i);
      binori::write_table((fs::path(out_dir) / name).string(), s.left, meta);
      std::snprintf(name, sizeof name, "hrtf_%03zu_right.dirt", i);
      binori::write_table((fs::path(out_dir) / name).string(), s.right, meta);
    }
    for (std::size_t i = 0; i < pools.vdps.size(); ++i) {
      std::snprintf(name, sizeof name, "vdp_%03zu.dirt", i);
      binori::write_table((fs::path(out_dir) / name).string(), pools.vdps[i], {{"source", "synthetic cardioid"}});
    }
  });
}

binori_status binori_render(const double* source, size_t n, double sample_rate, double theta_dir_deg,
                            double theta_ori_deg, double r_m, double h_m, const binori_table* hrtf_left,
                            const binori_table* hrtf_right, const binori_table* vdp,
                            const binori_near_field* near_field, double* left, double* right) {
  return guard([&] {
    need(source, "source");
    need(hrtf_left, "hrtf_left");
    need(hrtf_right, "hrtf_right");
    need(vdp, "vdp");
    need(left, "left");
    need(right, "right");
    const binori::AudioBuffer src(std::vector<double>(source, source + n), sample_rate, 1);
    const binori::SceneGeometry g{theta_dir_deg, theta_ori_deg, r_m, h_m};
    const binori::BinauralRecording rec =
        near_field ? binori::render(src, g, hrtf_left->value, hrtf_right->value, vdp->value, to_cpp(*near_field))
                   : binori::render_far_field(src, g, hrtf_left->value, hrtf_right->value, vdp->value);
    std::copy(rec.left.samples().begin(), rec.left.samples().end(), left);
    std::copy(rec.right.samples().begin(), rec.right.samples().end(), right);
  });
}

binori_status binori_features(const double* left, const double* right, size_t n, double sample_rate, double h_m,
                              int preprocess, size_t length, float* out) {
  return guard([&] {
    need(left, "left");
    need(right, "right");
    need(out, "out");
    binori::BinauralRecording rec{binori::AudioBuffer(std::vector<double>(left, left + n), sample_rate, 1),
                                  binori::AudioBuffer(std::vector<double>(right, right + n), sample_rate, 1),
                                  binori::SceneGeometry{0.0, 0.0, 1.0, h_m}, 0.0, 0.0};
    rec.geometry.validate();
    if (preprocess) rec = binori::preprocess(rec);
    binori::FeatureConfig cfg = binori::harness_features();
    cfg.length = length;
    const auto flat = binori::flatten(binori::assemble(rec, cfg));
    std::copy(flat.begin(), flat.end(), out);
  });
}

binori_status binori_generate_dataset(const char* spec_json, const char* labels_csv_path, binori_batch** out) {
  return guard([&] {
    need(spec_json, "spec_json");
    need(out, "out");
    const binori::DatasetSpec spec = binori::dataset_spec_from_json(spec_json);
    binori::Dataset d = binori::generate_dataset(spec);
    if (labels_csv_path) binori::write_labels(labels_csv_path, d.meta);
    *out = new binori_batch{std::move(d.batch)};
  });
}

binori_status binori_batch_read(const char* path, binori_batch** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new binori_batch{binori::read_batch(path)};
  });
}

binori_status binori_batch_write(const binori_batch* batch, const char* path) {
  return guard([&] {
    need(batch, "batch");
    need(path, "path");
    binori::write_batch(path, batch->value);
  });
}

size_t binori_batch_count(const binori_batch* batch) { return batch ? batch->value.count() : 0; }
size_t binori_batch_length(const binori_batch* batch) { return batch ? batch->value.length : 0; }

binori_status binori_batch_labels(const binori_batch* batch, double* out) {
  return guard([&] {
    need(batch, "batch");
    need(out, "out");
    for (std::size_t i = 0; i < batch->value.count(); ++i) {
      out[2 * i] = batch->value.labels[i][0];
      out[2 * i + 1] = batch->value.labels[i][1];
    }
  });
}

void binori_batch_free(binori_batch* batch) { delete batch; }

binori_status binori_train(const binori_batch* data, const char* config_json, const binori_model* start,
                           binori_log_fn log, void* user, binori_model** out) {
  return guard([&] {
    need(data, "data");
    need(out, "out");
    binori::TrainConfig tc;
    if (config_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(config_json);
        if (j.contains("batch_size")) tc.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("learning_rate")) tc.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("epochs")) tc.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("seed")) tc.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("dropout")) tc.dropout = j.at("dropout").get<double>();
      } catch (const nlohmann::json::exception& e) {
        binori::fail(binori::ErrorCode::invalid_input, std::string("train config: ") + e.what());
      }
    }
    tc.resume = start != nullptr;
    const binori::Architecture arch =
        start ? start->value.architecture() : binori::default_architecture(data->value.length);
    auto model = binori::train(data->value, tc, arch, nullptr, start ? &start->value : nullptr,
                               [&](std::size_t e, double l, const binori::EstimatorModel&) {
                                 if (!log) return;
                                 const std::string msg = "epoch " + std::to_string(e + 1) + " loss " + fmt(l);
                                 log(msg.c_str(), user);
                               });
    *out = new binori_model{std::move(model)};
  });
}

binori_status binori_model_save(const binori_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    binori::save_model(path, model->value);
  });
}

binori_status binori_model_load(const char* path, binori_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new binori_model{binori::load_model(path)};
  });
}

binori_status binori_predict(const binori_model* model, const binori_batch* batch, double* out) {
  return guard([&] {
    need(model, "model");
    need(batch, "batch");
    need(out, "out");
    const auto pred = binori::predict(model->value, batch->value);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      out[2 * i] = pred[i].theta_dir_deg;
      out[2 * i + 1] = pred[i].theta_ori_deg;
    }
  });
}

void binori_model_free(binori_model* model) { delete model; }

binori_status binori_evaluate(const binori_model* model, const binori_batch* batch, double facing_sector_deg,
                              int half_width, binori_report** out) {
  return guard([&] {
    need(model, "model");
    need(batch, "batch");
    need(out, "out");
    binori::FacingConfig fc;
    if (facing_sector_deg > 0.0) fc.sector_deg = facing_sector_deg;
    fc.half_width = half_width != 0;
    *out = new binori_report{binori::evaluate(model->value, batch->value, fc)};
  });
}

binori_status binori_report_percentiles(const binori_report* report, double out[6]) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    const auto& r = report->value;
    const double v[6] = {r.dir.p50, r.dir.p80, r.dir.p90, r.ori.p50, r.ori.p80, r.ori.p90};
    std::copy(v, v + 6, out);
  });
}

binori_status binori_report_class_accuracy(const binori_report* report, double out[4]) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    std::copy(report->value.class_accuracy.begin(), report->value.class_accuracy.end(), out);
  });
}

binori_status binori_report_json(const binori_report* report, char** out) {
  return guard([&] {
    need(report, "report");
    need(out, "out");
    *out = dup_string(binori::report_json(report->value));
  });
}

binori_status binori_report_write(const binori_report* report, const char* prefix) {
  return guard([&] {
    need(report, "report");
    need(prefix, "prefix");
    binori::write_report(prefix, report->value);
  });
}

void binori_report_free(binori_report* report) { delete report; }

binori_status binori_run_experiment(const char* name, const char* config_json, uint64_t seed, const char* out_dir,
                                    binori_log_fn log, void* user) {
  return guard([&] {
    need(name, "name");
    binori::ExperimentConfig cfg =
        config_json ? binori::experiment_config_from_json(config_json) : binori::ExperimentConfig{};
    if (seed != 0) cfg.seed = seed;
    binori::run_experiment(name, cfg, out_dir ? out_dir : "", [&](const std::string& m) {
      if (log) log(m.c_str(), user);
    });
  });
}

binori_status binori_correlation_diagnostic(const binori_table* hrtf_left, const binori_table* hrtf_right,
                                            const binori_table* vdp, double grid_step_deg, const char* out_dir) {
  return guard([&] {
    need(hrtf_left, "hrtf_left");
    need(hrtf_right, "hrtf_right");
    need(vdp, "vdp");
    need(out_dir, "out_dir");
    const auto m = binori::correlation_diagnostic(hrtf_left->value, hrtf_right->value, vdp->value, grid_step_deg);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    binori::write_matrix_csv((fs::path(out_dir) / "hrtf.csv").string(), m.hrtf);
    binori::write_matrix_csv((fs::path(out_dir) / "vdp.csv").string(), m.vdp);
    binori::write_matrix_csv((fs::path(out_dir) / "combined.csv").string(), m.combined);
    std::ofstream f((fs::path(out_dir) / "angles.csv").string());
    binori::require(f.good(), binori::ErrorCode::io, "cannot write angles.csv");
    f << "angle_deg\n";
    for (double a : m.angles_deg) f << a << '\n';
  });
}

}  // extern "C"
