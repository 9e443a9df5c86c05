#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "json.hpp"

#include "binori/angles.hpp"
#include "binori/dataset.hpp"
#include "binori/error.hpp"
#include "binori/evaluation.hpp"
#include "binori/experiment.hpp"

using namespace binori;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec(std::size_t count) {
  DatasetSpec s;
  s.count = count;
  s.seed = 77;
  s.features = harness_features();
  s.features.length = 64;
  s.pools.hrtf_count = 2;
  s.pools.vdp_count = 2;
  s.pools.source_count = 3;
  s.pools.duration_s = 0.5;
  s.threads = 1;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, std::fabs(f - static_cast<double>(i) / x.size()), std::fabs(f - (i + 1.0) / x.size())});
  }
  return d;
}

}  // namespace

TEST_CASE("dataset generation is reproducible and thread-count independent") {
  auto spec = small_spec(12);
  const auto a = generate_dataset(spec);
  spec.threads = 4;
  const auto b = generate_dataset(spec);
  CHECK(a.batch.data == b.batch.data);
  CHECK(a.batch.labels == b.batch.labels);
  CHECK(a.batch.count() == 12);
  spec.seed = 78;
  CHECK(generate_dataset(spec).batch.data != a.batch.data);
}

TEST_CASE("far-field datasets hold far-field renderings of the drawn scenes") {
  auto spec = small_spec(4);
  spec.near_field = false;
  const auto d = generate_dataset(spec);
  const auto pools = resolve_pools(spec);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& m = d.meta[i];
    const auto& subj = pools.hrtfs[m.hrtf];
    const auto rec = render_far_field(pools.sources[m.source], {m.theta_dir_deg, m.theta_ori_deg, m.r_m, m.h_m},
                                      subj.left, subj.right, pools.vdps[m.vdp]);
    const auto x = flatten(assemble(preprocess(rec, spec.preprocess), spec.features));
    const auto s = d.batch.sample(i);
    CHECK(std::equal(x.begin(), x.end(), s.begin()));
    CHECK(d.batch.labels[i][0] == m.theta_dir_deg);
  }
  spec.near_field = true;
  CHECK(generate_dataset(spec).batch.data != d.batch.data);
}

TEST_CASE("scene labels are uniform") {
  auto spec = small_spec(10000);
  const auto pools = build_pools(spec.pools);
  std::vector<double> dir, ori, r;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto m = draw_scene(spec, pools, i);
    dir.push_back(m.theta_dir_deg);
    ori.push_back(m.theta_ori_deg);
    r.push_back(m.r_m);
    REQUIRE(m.theta_dir_deg >= -180.0);
    REQUIRE(m.theta_dir_deg < 180.0);
  }
  CHECK(ks_uniform(dir, -180, 180) < 0.05);
  CHECK(ks_uniform(ori, -180, 180) < 0.05);
  CHECK(ks_uniform(r, 0.5, 1.5) < 0.05);
}

TEST_CASE("dataset specs validate and round trip through json") {
  auto spec = small_spec(5);
  spec.r_m = {0.7, 1.2};
  spec.near_field = false;
  const auto back = dataset_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  CHECK(back.r_m.lo == 0.7);
  CHECK(!back.near_field);
  spec.pools.hrtf_count = 0;
  try {
    generate_dataset(spec);
    FAIL("expected an input error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_input);
  }
  CHECK_THROWS_AS(dataset_spec_from_json("{not json"), Error);
  CHECK_THROWS_AS(dataset_spec_from_json(R"({"count": -3})"), Error);
}

TEST_CASE("labels csv") {
  const auto d = generate_dataset(small_spec(3));
  const auto path = fs::temp_directory_path() / "binori_labels.csv";
  write_labels(path.string(), d.meta);
  std::ifstream f(path);
  std::string header, line;
  std::getline(f, header);
  CHECK(header.rfind("index,theta_dir_deg,theta_ori_deg", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 3);
  fs::remove(path);
}

TEST_CASE("error statistics") {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-180, 180);
  std::vector<double> truth(20000);
  for (auto& t : truth) t = u(g);
  SUBCASE("perfect predictor") {
    const auto s = angle_stats(truth, truth);
    CHECK(s.p90 == 0.0);
    CHECK(s.mean == 0.0);
    CHECK(s.cdf.front().first == 0.0);
    CHECK(s.cdf.back().second == 1.0);
  }
  SUBCASE("constant predictor averages 90 degrees") {
    const std::vector<double> zero(truth.size(), 0.0);
    const auto s = angle_stats(zero, truth);
    CHECK(s.mean == doctest::Approx(90.0).epsilon(0.02));
    CHECK(s.cdf.back().second == 1.0);
    for (std::size_t i = 1; i < s.cdf.size(); ++i) {
      CHECK(s.cdf[i].first >= s.cdf[i - 1].first);
      CHECK(s.cdf[i].second >= s.cdf[i - 1].second);
    }
    for (double e : s.errors) CHECK((e >= 0 && e <= 180));
    std::size_t total = 0;
    for (auto c : s.sector_count) total += c;
    CHECK(total == truth.size());
    CHECK(s.sector_mean[18] == doctest::Approx(5.0).epsilon(0.05));  // true angles in [0, 10)
  }
  SUBCASE("percentiles interpolate") {
    CHECK(percentile({0, 10}, 50) == 5);
    CHECK(percentile({3, 1, 2}, 100) == 3);
    CHECK(percentile({4}, 80) == 4);
  }
}

TEST_CASE("facing classes") {
  CHECK(facing_class(0, 0) == 0);
  CHECK(std::string(facing_class_name(0)) == "facing & facing");
  CHECK(facing_class(0, 180) == 1);
  CHECK(facing_class(90, 0) == 2);
  CHECK(facing_class(-100, 60) == 3);
  CHECK(facing_class(25, -25) == 0);
  CHECK(facing_class(25.0000001, 0) == 2);
  FacingConfig half;
  half.half_width = true;
  CHECK(facing_class(12.5, 0, half) == 0);
  CHECK(facing_class(13, 0, half) == 2);
  const std::vector<double> td = {0, 0, 90, 90, 10}, to = {0, 180, 0, 180, 100};
  const std::vector<double> pd = {0, 0, 90, 0, 90}, po = {0, 0, 0, 180, 100};
  const auto c = facing_classify(pd, po, td, to);
  std::size_t total = 0;
  for (auto& row : c)
    for (auto v : row) total += v;
  CHECK(total == 5);
  CHECK(c[0][0] == 1);
  CHECK(c[1][0] == 1);
  CHECK(c[3][1] == 1);
  CHECK(c[1][3] == 1);
  const auto r = evaluate(pd, po, td, to);
  CHECK(r.class_accuracy[0] == 1.0);
  CHECK(r.class_accuracy[1] == 0.0);
  CHECK(r.class_accuracy[2] == 1.0);
}

TEST_CASE("reports are written as json and csv") {
  const std::vector<double> t = {0, 45, -90, 170}, p = {5, 40, -80, -175};
  const auto r = evaluate(p, t, t, p);
  const auto prefix = (fs::temp_directory_path() / "binori_report_").string();
  write_report(prefix, r);
  const auto j = nlohmann::json::parse(slurp(prefix + "report.json"));
  CHECK(j.at("count") == 4);
  std::ifstream cdf(prefix + "cdf_dir.csv"), polar(prefix + "polar_ori.csv");
  std::string h1, h2;
  std::getline(cdf, h1);
  std::getline(polar, h2);
  CHECK(h1 == "error,percentile");
  CHECK(h2 == "sector_center,mean_error");
  for (const char* f : {"report.json", "cdf_dir.csv", "cdf_ori.csv", "polar_dir.csv", "polar_ori.csv"})
    fs::remove(prefix + f);
}

TEST_CASE("correlation diagnostic") {
  const NearFieldParams nf;
  const auto [l, r] = synth_hrtf(nf, 10.0, 129, 62.5);
  const auto v = synth_vdp(0.7, 129, 62.5, 10.0);
  const auto m = correlation_diagnostic(l, r, v, 20.0);
  const std::size_t n = m.angles_deg.size();
  CHECK(n == 18);
  CHECK(m.combined.size() == n * n);
  for (const auto* mat : {&m.hrtf, &m.vdp, &m.combined})
    for (std::size_t i = 0; i < mat->size(); ++i) {
      CHECK(std::fabs((*mat)[i][i] - 1.0) <= 1e-12);
      for (std::size_t j = 0; j < i; ++j) CHECK(std::fabs((*mat)[i][j] - (*mat)[j][i]) <= 1e-12);
    }
  for (std::size_t i = 0; i < n; ++i) {
    const double a = m.angles_deg[i];
    const auto it = std::find_if(m.angles_deg.begin(), m.angles_deg.end(),
                                 [&](double b) { return angular_error(a, -b) < 1e-9; });
    REQUIRE(it != m.angles_deg.end());
    CHECK(m.vdp[i][static_cast<std::size_t>(it - m.angles_deg.begin())] > 0.99);
  }
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
}

TEST_CASE("experiments are reproducible") {
  ExperimentConfig cfg;
  cfg.pools.hrtf_count = 3;
  cfg.pools.vdp_count = 3;
  cfg.pools.source_count = 4;
  cfg.pools.duration_s = 0.5;
  cfg.test_hrtfs = 1;
  cfg.test_vdps = 1;
  cfg.test_sources = 1;
  cfg.features.length = 64;
  cfg.train_count = 24;
  cfg.test_count = 8;
  cfg.finetune_count = 8;
  cfg.finetune_epochs = 1;
  cfg.unknown_test_count = 8;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 8;
  cfg.threads = 2;
  const auto back = experiment_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  const auto a = fs::temp_directory_path() / "binori_exp_a", b = fs::temp_directory_path() / "binori_exp_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto ra = run_experiment("all", cfg, a.string());
  cfg.threads = 1;
  run_experiment("all", cfg, b.string());
  for (const char* key : {"main", "near_field", "far_field", "unknown_hrtf", "known_hrtf"}) {
    CHECK(ra.reports.count(key) == 1);
    CHECK(ra.reports.at(key).count == 8);
    CHECK(slurp(a / (std::string(key) + "_report.json")) == slurp(b / (std::string(key) + "_report.json")));
    CHECK(slurp(a / (std::string(key) + "_cdf_dir.csv")) == slurp(b / (std::string(key) + "_cdf_dir.csv")));
  }
  CHECK(fs::exists(a / "summary.json"));
  CHECK_THROWS_AS(run_experiment("bogus", cfg), Error);
  fs::remove_all(a);
  fs::remove_all(b);
}
