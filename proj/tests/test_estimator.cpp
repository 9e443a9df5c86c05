#include <cmath>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "binori/angles.hpp"
#include "binori/error.hpp"
#include "binori/estimator.hpp"

using namespace binori;

namespace {

Architecture toy_arch(double dropout = 0.0) {
  Architecture a;
  a.in_channels = 3;
  a.in_length = 16;
  a.conv = {{4, 3, 1}, {6, 5, 2}};
  a.fc = {7, 4};
  a.dropout = dropout;
  return a;
}

Architecture small_arch(std::size_t length) {
  Architecture a;
  a.in_length = length;
  a.conv = {{8, 5, 1}, {8, 5, 2}, {16, 5, 2}};
  a.fc = {32, 4};
  a.dropout = 0.0;
  return a;
}

// Features that depend smoothly on both angles, plus a little noise.
FeatureBatch angle_dataset(std::size_t count, std::size_t length, std::uint64_t seed, bool constant = false) {
  FeatureBatch b;
  b.length = length;
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> ua(-180.0, 180.0);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (std::size_t i = 0; i < count; ++i) {
    const double d = constant ? 30.0 : ua(g), o = constant ? -120.0 : ua(g);
    std::vector<float> x(kFeatureChannels * length);
    for (std::size_t c = 0; c < kFeatureChannels; ++c)
      for (std::size_t p = 0; p < length; ++p) {
        const double t = static_cast<double>(p) / length * 2 * std::numbers::pi;
        const double v = c < 3 ? std::sin(t * (c + 1) + deg2rad(d)) : std::cos(t * (c - 2) + deg2rad(o));
        x[c * length + p] = static_cast<float>(v + noise(g));
      }
    b.append(x, d, o);
  }
  return b;
}

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> targets(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> ua(-180.0, 180.0);
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> y(4, count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto e = encode_angles(ua(g), ua(g));
    for (int r = 0; r < 4; ++r) y(r, i) = static_cast<T>(e[r]);
  }
  return y;
}

}  // namespace

TEST_CASE("architecture bookkeeping") {
  const auto a = default_architecture(512);
  CHECK(a.conv.size() == 8);
  CHECK(a.fc.size() == 3);
  CHECK(a.fc.back() == 4);
  CHECK(a.length_after(8) == 32);
  CHECK(a.flat_size() == 128 * 32);
  CHECK(Network<float>(a).parameter_count() == a.parameter_count());
  Architecture bad = toy_arch();
  bad.conv[1].out_channels = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = toy_arch();
  bad.fc = {7, 0};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("zero input with zero biases gives zero output") {
  Network<double> net(toy_arch());
  Rng rng(3);
  net.initialize(rng);
  const std::vector<double> x(3 * 16 * 2, 0.0);
  const auto& y = net.forward(x, 2, Mode::inference);
  CHECK(y.rows() == 4);
  CHECK(y.cols() == 2);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hand-built network selects input entries") {
  Architecture a;
  a.in_channels = 2;
  a.in_length = 4;
  a.conv = {{2, 3, 1}};
  a.fc = {8};
  a.dropout = 0.0;
  Network<double> net(a);
  auto p = net.parameters();
  std::fill(p.begin(), p.end(), 0.0);
  // conv weight (out o, tap j, in c) at o + 2 * (2 * j + c); centre tap j = 1, out o reads in 1 - o
  p[0 + 2 * (2 * 1 + 1)] = 1.0;
  p[1 + 2 * (2 * 1 + 0)] = 1.0;
  const std::size_t fc = 2 * 2 * 3 + 2;
  for (std::size_t i = 0; i < 8; ++i) p[fc + i + 8 * i] = 1.0;
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};  // channel 0 then channel 1
  const auto& y = net.forward(x, 1, Mode::inference);
  // flattened position-major: (pos 0: ch0, ch1), (pos 1: ...)
  const double want[8] = {5, 1, 6, 2, 7, 3, 8, 4};
  for (int i = 0; i < 8; ++i) CHECK(y(i, 0) == want[i]);
  CHECK_THROWS_AS(net.forward(std::vector<double>(7), 1, Mode::inference), Error);
}

TEST_CASE("analytic gradients match central differences") {
  for (double dropout : {0.0, 0.4}) {
    Network<double> net(toy_arch(dropout));
    Rng init(5);
    net.initialize(init);
    auto p = net.parameters();
    std::mt19937_64 g(6);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto& v : p) v += n(g);  // nonzero biases
    net.input_mean() = {0.1, -0.2, 0.0};
    net.input_scale() = {1.5, 0.7, 1.0};
    const std::size_t count = 3;
    const auto x = oracle::noise(3 * 16 * count, 7);
    const auto y = targets<double>(count, 8);
    const Mode mode = dropout > 0 ? Mode::train : Mode::inference;
    auto loss_at = [&] {
      Rng r(99);
      net.forward(x, count, mode, &r);
      std::vector<double> scratch(p.size());
      return net.backward(y, scratch);
    };
    std::vector<double> grad(p.size());
    {
      Rng r(99);
      net.forward(x, count, mode, &r);
      net.backward(y, grad);
    }
    REQUIRE(p.size() >= 200);
    std::size_t checked = 0, bad = 0;
    const std::size_t stride = std::max<std::size_t>(1, p.size() / 300);
    for (std::size_t i = 0; i < p.size(); i += stride) {
      const double keep = p[i], h = 1e-5;
      p[i] = keep + h;
      const double up = loss_at();
      p[i] = keep - h;
      const double down = loss_at();
      p[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double diff = std::fabs(fd - grad[i]);
      if (diff > 1e-7 && diff > 1e-4 * std::max(std::fabs(fd), std::fabs(grad[i]))) ++bad;
      ++checked;
    }
    CHECK(checked >= 200);
    CHECK(bad == 0);
  }
}

TEST_CASE("gradient vanishes at a perfect fit and ignores duplicated samples") {
  Network<double> net(toy_arch());
  Rng init(1);
  net.initialize(init);
  const auto x = oracle::noise(3 * 16, 2);
  const auto& out = net.forward(x, 1, Mode::inference);
  const Eigen::MatrixXd y = out;
  std::vector<double> g(net.parameter_count());
  CHECK(net.backward(y, g) == 0.0);
  for (double v : g) CHECK(std::fabs(v) <= 1e-12);

  const auto t = targets<double>(1, 3);
  net.forward(x, 1, Mode::inference);
  std::vector<double> g1(g.size()), g2(g.size());
  const double l1 = net.backward(t, g1);
  std::vector<double> xx(x);
  xx.insert(xx.end(), x.begin(), x.end());
  Eigen::MatrixXd tt(4, 2);
  tt << t, t;
  net.forward(xx, 2, Mode::inference);
  const double l2 = net.backward(tt, g2);
  CHECK(l2 == doctest::Approx(l1).epsilon(1e-14));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-12));
}

TEST_CASE("angle encoding") {
  for (int d = -180; d < 180; ++d) {
    const auto e = encode_angles(d, -d - 1);
    const auto a = decode_angles(e[0], e[1], e[2], e[3]);
    CHECK(std::fabs(a.theta_dir_deg - d) < 1e-9);
    CHECK(angular_error(a.theta_ori_deg, -d - 1) < 1e-9);
    CHECK(e[0] * e[0] + e[1] * e[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(decode_angles(0, -1, 0, -1).theta_dir_deg == -180.0);
  CHECK(decode_angles(0, 5, 3, 0).theta_ori_deg == doctest::Approx(90.0));
  CHECK(loss(decode_angles(0, 0, 0, 0), 0, 0) == 0.5);
  const auto e = encode_angles(40, -75);
  const auto p = decode_angles(e[0], e[1], e[2], e[3]);
  CHECK(loss(p, 40, -75) == doctest::Approx(0.0).epsilon(1e-30));
  const auto q = decode_angles(0.3, 0.1, -0.2, 0.9);
  const auto qe = encode_angles(q.theta_dir_deg, q.theta_ori_deg);
  const auto pe = decode_angles(qe[0], qe[1], qe[2], qe[3]);
  CHECK(loss(p, q.theta_dir_deg, q.theta_ori_deg) == doctest::Approx(loss(pe, 40, -75)).epsilon(1e-12));
}

TEST_CASE("adam takes bias-corrected steps") {
  Adam<double> opt(2, 0.1);
  std::vector<double> p = {1.0, -1.0}, g = {0.5, -2.0};
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-0.9).epsilon(1e-6));
  CHECK(opt.steps() == 1);
}

TEST_CASE("training") {
  const std::size_t L = 64;
  SUBCASE("seeded runs are bit-identical") {
    const auto data = angle_dataset(120, L, 1);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 7;
    cfg.dropout = 0.3;
    auto arch = small_arch(L);
    arch.dropout = 0.3;
    const auto a = train(data, cfg, arch), b = train(data, cfg, arch);
    CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    const auto dir = std::filesystem::temp_directory_path();
    save_model((dir / "binori_a.bocn").string(), a);
    save_model((dir / "binori_b.bocn").string(), b);
    std::ifstream fa(dir / "binori_a.bocn", std::ios::binary), fb(dir / "binori_b.bocn", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    cfg.seed = 8;
    const auto c = train(data, cfg, arch);
    CHECK(!std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
  }
  SUBCASE("loss decreases on a learnable dataset") {
    const auto data = angle_dataset(500, L, 2);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.dropout = 0.0;
    TrainLog log;
    const auto m = train(data, cfg, small_arch(L), &log);
    REQUIRE(log.epoch_loss.size() == 30);
    int rises = 0;
    for (std::size_t e = 1; e < 30; ++e) rises += log.epoch_loss[e] > log.epoch_loss[e - 1];
    CHECK(rises <= 2);
    CHECK(log.epoch_loss.back() < log.epoch_loss.front());
  }
  SUBCASE("constant targets are learned") {
    const auto data = angle_dataset(200, L, 3, true);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.dropout = 0.0;
    const auto m = train(data, cfg, small_arch(L));
    double total = 0;
    for (const auto& p : predict(m, data)) total += loss(p, 30.0, -120.0);
    CHECK(total / data.count() < 1e-3);
  }
  SUBCASE("invalid configurations") {
    FeatureBatch empty;
    empty.length = L;
    CHECK_THROWS_AS(train(empty, TrainConfig{}, small_arch(L)), Error);
    TrainConfig bad;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(train(angle_dataset(4, L, 1), bad, small_arch(L)), Error);
  }
}

TEST_CASE("checkpoint container") {
  Network<float> m(small_arch(32));
  Rng rng(2);
  m.initialize(rng);
  m.input_mean()[1] = 0.25f;
  const auto path = (std::filesystem::temp_directory_path() / "binori_model.bocn").string();
  save_model(path, m);
  const auto back = load_model(path);
  CHECK(back.architecture() == m.architecture());
  CHECK(std::equal(back.parameters().begin(), back.parameters().end(), m.parameters().begin()));
  CHECK(back.input_mean() == m.input_mean());
  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), {});
  }
  auto expect_format = [&](const std::string& b) {
    {
      std::ofstream f(path, std::ios::binary);
      f << b;
    }
    try {
      load_model(path);
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::format);
    }
  };
  expect_format(bytes.substr(0, bytes.size() - 4));
  std::string broken = bytes;
  broken[0] = 'X';
  expect_format(broken);
  broken = bytes;
  std::uint32_t big = 900;
  std::memcpy(broken.data() + 4 + 4 + 4 + 4 + 4, &big, 4);  // first conv out_channels
  expect_format(broken);
  std::filesystem::remove(path);
}

TEST_CASE("template matching") {
  TemplateBank bank;
  bank.length = 8;
  auto make = [](double d, double o) {
    FeatureTensor x;
    for (std::size_t c = 0; c < kFeatureChannels; ++c)
      for (std::size_t p = 0; p < 8; ++p)
        x.channels[c].push_back(std::sin(deg2rad(d) * (c + 1) + 0.3 * p) + std::cos(deg2rad(o) * (p % 3 + 1) + c));
    return x;
  };
  for (int d = -180; d < 180; d += 10)
    for (int o = -180; o < 180; o += 10) bank.add(make(d, o), d, o);
  CHECK(bank.size() == 1296);
  for (int d = -180; d < 180; d += 30)
    for (int o = -170; o < 180; o += 40) {
      const auto p = template_match(make(d, o), bank);
      CHECK(p.theta_dir_deg == d);
      CHECK(p.theta_ori_deg == o);
    }
  const auto p = template_match(make(33, -52), bank);
  CHECK(angular_error(p.theta_dir_deg, 33) <= 10);
  CHECK(angular_error(p.theta_ori_deg, -52) <= 10);
  CHECK_THROWS_AS(template_match(make(0, 0), TemplateBank{8, {}, {}}), Error);
}
