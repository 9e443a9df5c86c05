#include <cmath>
#include <random>

#include "doctest.h"

#include "binori/angles.hpp"
#include "binori/error.hpp"
#include "binori/geometry.hpp"

using namespace binori;

namespace {

using ld = long double;
constexpr ld kPi = 3.141592653589793238462643383279502884L;

ld alpha_ref(ld h, ld r) { return std::asin((h / 2) / r) * 180 / kPi; }
ld beta_ref(ld h, ld r, ld dir_deg) {
  const ld t = std::fabs(dir_deg) * kPi / 180;
  return std::atan((h * std::cos(t) / 2) / (r - h * std::sin(t) / 2)) * 180 / kPi;
}

}  // namespace

TEST_CASE("offsets match a long-double evaluation at random geometries") {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> uh(0.1001, 0.2999), ur(0.31, 20.0), ud(-180.0, 180.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const SceneGeometry s{ud(g), 0.0, ur(g), uh(g)};
    worst = std::max<double>(worst, std::fabs(s.alpha_deg() - alpha_ref(s.h_m, s.r_m)));
    worst = std::max<double>(worst, std::fabs(s.beta_deg() - beta_ref(s.h_m, s.r_m, s.theta_dir_deg)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("front-right worked example") {
  const SceneGeometry s{0.0, 30.0, 0.9, 0.18};
  const auto [l, r] = parallax_adjust(s);
  CHECK(std::fabs(l - (30.0 - 5.739170477266787)) < 1e-9);
  CHECK(std::fabs(r - (30.0 + 5.710593137499643)) < 1e-9);
  CHECK(l == doctest::Approx(24.261).epsilon(1e-4));
  CHECK(r == doctest::Approx(35.711).epsilon(1e-4));
}

TEST_CASE("beta vanishes on the ear axis and alpha ignores direction") {
  CHECK(std::fabs(SceneGeometry{90.0, 0.0, 0.9, 0.18}.beta_deg()) < 1e-12);
  CHECK(std::fabs(SceneGeometry{-90.0, 0.0, 0.9, 0.18}.beta_deg()) < 1e-12);
  CHECK(SceneGeometry{10.0, 0.0, 0.9, 0.18}.alpha_deg() == SceneGeometry{-130.0, 0.0, 0.9, 0.18}.alpha_deg());
}

TEST_CASE("far-field limit") {
  for (double dir : {-170.0, -45.0, 0.0, 60.0, 135.0}) {
    const SceneGeometry s{dir, 0.0, 1e6, 0.18};
    CHECK(std::fabs(s.alpha_deg()) < 1e-3);
    CHECK(std::fabs(s.beta_deg()) < 1e-3);
    const auto [l, r] = parallax_adjust(s);
    CHECK(std::fabs(l) < 1e-3);
    CHECK(std::fabs(r) < 1e-3);
  }
}

TEST_CASE("left-ipsilateral scenes mirror right-ipsilateral ones") {
  for (double dir : {20.0, 70.0, 120.0, 170.0}) {
    const auto [l, r] = parallax_adjust({dir, 40.0, 0.7, 0.18});
    const auto [ml, mr] = parallax_adjust({-dir, -40.0, 0.7, 0.18});
    CHECK(ml == doctest::Approx(-r).epsilon(1e-12));
    CHECK(mr == doctest::Approx(-l).epsilon(1e-12));
  }
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(parallax_adjust({0, 0, 0.1, 0.18}), Error);
  CHECK_THROWS_AS(parallax_adjust({0, 0, 1.0, 0.35}), Error);
  CHECK_THROWS_AS(parallax_adjust({NAN, 0, 1.0, 0.18}), Error);
  try {
    SceneGeometry{0, 0, 0.15, 0.18}.validate();
    FAIL("expected a geometry error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_geometry);
  }
}

TEST_CASE("angular error") {
  CHECK(angular_error(10, 350) == 20);
  CHECK(angular_error(179, -179) == doctest::Approx(2));
  CHECK(angular_error(33, 33) == 0);
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(-720, 720);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(g), b = u(g);
    const double e = angular_error(a, b);
    CHECK(e == angular_error(b, a));
    CHECK(e >= 0);
    CHECK(e <= 180);
  }
  CHECK(wrap_deg(180.0) == -180.0);
  CHECK(wrap_deg(-540.0) == -180.0);
}
