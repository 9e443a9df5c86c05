#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "binori/binori.h"

namespace {

struct Failure {
  int code;
};

void check(binori_status s) {
  if (s == BINORI_OK) return;
  std::cerr << "binori: " << binori_status_name(s) << ": " << binori_last_error() << '\n';
  throw Failure{static_cast<int>(s)};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    std::cerr << "binori: cannot read " << path << '\n';
    throw Failure{BINORI_ERR_IO};
  }
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "binori: " << what << ": " << e.what() << '\n';
    throw Failure{BINORI_ERR_INVALID_INPUT};
  }
}

void log_line(const char* msg, void*) { std::cerr << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binaural direction and orientation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(binori_version()));

  auto* synth = app.add_subcommand("synth-tables", "Write synthetic listener and speaker tables");
  std::string synth_out, synth_pools;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out-dir", synth_out, "Output directory")->required();
  synth->add_option("--pools", synth_pools, "Pool spec JSON file");
  synth->add_option("--seed", synth_seed, "Pool seed (0 keeps the spec value)");

  auto* gen = app.add_subcommand("gen", "Render and featurize a dataset");
  std::string gen_spec, gen_out, gen_labels;
  std::uint64_t gen_seed = 0;
  int gen_threads = -1;
  gen->add_option("--spec", gen_spec, "Dataset spec JSON file");
  gen->add_option("--out", gen_out, "Output batch file")->required();
  gen->add_option("--labels", gen_labels, "Optional label CSV");
  gen->add_option("--seed", gen_seed, "Dataset seed (0 keeps the spec value)");
  gen->add_option("--threads", gen_threads, "Worker threads (0 = hardware)");

  auto* train = app.add_subcommand("train", "Train the estimator on a batch file");
  std::string train_data, train_config, train_out, train_resume;
  std::uint64_t train_seed = 0;
  int train_epochs = -1;
  train->add_option("--data", train_data, "Training batch file")->required();
  train->add_option("--config", train_config, "Training config JSON file");
  train->add_option("--out", train_out, "Output checkpoint")->required();
  train->add_option("--resume", train_resume, "Continue from this checkpoint");
  train->add_option("--seed", train_seed, "Training seed (0 keeps the config value)");
  train->add_option("--epochs", train_epochs, "Epoch count override");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a batch file");
  std::string eval_model, eval_data, eval_prefix;
  double eval_sector = 25.0;
  bool eval_half = false;
  eval->add_option("--model", eval_model, "Checkpoint")->required();
  eval->add_option("--data", eval_data, "Test batch file")->required();
  eval->add_option("--out-prefix", eval_prefix, "Report path prefix")->required();
  eval->add_option("--sector", eval_sector, "Facing sector in degrees");
  eval->add_flag("--half-width", eval_half, "Use sector/2 as the facing bound");

  auto* exp = app.add_subcommand("experiment", "Run a named protocol");
  std::string exp_name = "all", exp_config, exp_out;
  std::uint64_t exp_seed = 0;
  exp->add_option("--name", exp_name, "main | near-vs-far | known-vs-unknown-hrtf | all")
      ->check(CLI::IsMember({"main", "near-vs-far", "known-vs-unknown-hrtf", "all"}));
  exp->add_option("--config", exp_config, "Experiment config JSON file");
  exp->add_option("--out-dir", exp_out, "Output directory")->required();
  exp->add_option("--seed", exp_seed, "Seed override (0 keeps the config value)");

  auto* diag = app.add_subcommand("diag-corr", "Correlation matrices of listener, speaker and combined patterns");
  std::string diag_left, diag_right, diag_vdp, diag_out;
  double diag_grid = 10.0;
  diag->add_option("--hrtf-left", diag_left, "Left-ear table (synthetic default if omitted)");
  diag->add_option("--hrtf-right", diag_right, "Right-ear table");
  diag->add_option("--vdp", diag_vdp, "Speaker table (synthetic default if omitted)");
  diag->add_option("--grid", diag_grid, "Angle grid step in degrees");
  diag->add_option("--out-dir", diag_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      auto pools = parse_json(synth_pools.empty() ? "" : slurp(synth_pools), "pool spec");
      if (synth_seed != 0) pools["seed"] = synth_seed;
      check(binori_write_pool_tables(pools.dump().c_str(), synth_out.c_str()));
    } else if (*gen) {
      auto spec = parse_json(gen_spec.empty() ? "" : slurp(gen_spec), "dataset spec");
      if (gen_seed != 0) spec["seed"] = gen_seed;
      if (gen_threads >= 0) spec["threads"] = gen_threads;
      binori_batch* batch = nullptr;
      check(binori_generate_dataset(spec.dump().c_str(), gen_labels.empty() ? nullptr : gen_labels.c_str(), &batch));
      const binori_status s = binori_batch_write(batch, gen_out.c_str());
      binori_batch_free(batch);
      check(s);
    } else if (*train) {
      auto cfg = parse_json(train_config.empty() ? "" : slurp(train_config), "train config");
      if (train_seed != 0) cfg["seed"] = train_seed;
      if (train_epochs >= 0) cfg["epochs"] = train_epochs;
      binori_batch* batch = nullptr;
      binori_model* start = nullptr;
      binori_model* model = nullptr;
      check(binori_batch_read(train_data.c_str(), &batch));
      binori_status s = train_resume.empty() ? BINORI_OK : binori_model_load(train_resume.c_str(), &start);
      if (s == BINORI_OK) s = binori_train(batch, cfg.dump().c_str(), start, log_line, nullptr, &model);
      if (s == BINORI_OK) s = binori_model_save(model, train_out.c_str());
      binori_model_free(model);
      binori_model_free(start);
      binori_batch_free(batch);
      check(s);
    } else if (*eval) {
      binori_model* model = nullptr;
      binori_batch* batch = nullptr;
      binori_report* report = nullptr;
      binori_status s = binori_model_load(eval_model.c_str(), &model);
      if (s == BINORI_OK) s = binori_batch_read(eval_data.c_str(), &batch);
      if (s == BINORI_OK) s = binori_evaluate(model, batch, eval_sector, eval_half ? 1 : 0, &report);
      if (s == BINORI_OK) s = binori_report_write(report, eval_prefix.c_str());
      if (s == BINORI_OK) {
        double p[6];
        binori_report_percentiles(report, p);
        std::printf("theta_dir p50 %.2f p80 %.2f p90 %.2f\ntheta_ori p50 %.2f p80 %.2f p90 %.2f\n", p[0], p[1], p[2],
                    p[3], p[4], p[5]);
      }
      binori_report_free(report);
      binori_batch_free(batch);
      binori_model_free(model);
      check(s);
    } else if (*exp) {
      const std::string cfg = exp_config.empty() ? std::string() : slurp(exp_config);
      check(binori_run_experiment(exp_name.c_str(), cfg.empty() ? nullptr : cfg.c_str(), exp_seed, exp_out.c_str(),
                                  log_line, nullptr));
    } else if (*diag) {
      binori_table* left = nullptr;
      binori_table* right = nullptr;
      binori_table* vdp = nullptr;
      binori_status s = BINORI_OK;
      if (diag_left.empty() != diag_right.empty()) {
        std::cerr << "binori: --hrtf-left and --hrtf-right must be given together\n";
        return BINORI_ERR_INVALID_INPUT;
      }
      if (diag_left.empty()) {
        binori_near_field nf;
        binori_near_field_default(&nf);
        s = binori_synth_hrtf(&nf, diag_grid, 257, 31.25, &left, &right);
      } else {
        s = binori_table_read(diag_left.c_str(), &left);
        if (s == BINORI_OK) s = binori_table_read(diag_right.c_str(), &right);
      }
      if (s == BINORI_OK)
        s = diag_vdp.empty() ? binori_synth_vdp(0.7, 257, 31.25, diag_grid, &vdp)
                             : binori_table_read(diag_vdp.c_str(), &vdp);
      if (s == BINORI_OK) s = binori_correlation_diagnostic(left, right, vdp, diag_grid, diag_out.c_str());
      binori_table_free(left);
      binori_table_free(right);
      binori_table_free(vdp);
      check(s);
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
