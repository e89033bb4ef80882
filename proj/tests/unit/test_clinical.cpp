#include <doctest.h>

#include <frustum/clinical.hpp>
#include <frustum/error.hpp>

#include "oracles.hpp"

#include <random>

using namespace frustum;

namespace {

APPFrame rotated_app(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Mat3 r = exp_so3(Vec3(n(rng), n(rng), n(rng)));
  const Vec3 t(100 * n(rng), 100 * n(rng), 100 * n(rng));
  return app_from_landmarks(r * Vec3(-115, 0, 0) + t, r * Vec3(115, 0, 0) + t,
                            r * Vec3(0, 0, -95) + t);
}

}  // namespace

TEST_CASE("APP frame is right handed and orthonormal") {
  const APPFrame app = app_from_landmarks({-115, 0, 0}, {115, 0, 0}, {0, 0, -95});
  CHECK((app.lateral - Vec3::UnitX()).norm() < 1e-15);
  CHECK((app.longitudinal - Vec3::UnitZ()).norm() < 1e-15);
  CHECK((app.anterior - Vec3::UnitY()).norm() < 1e-15);
  Mat3 m;
  m << app.lateral, app.anterior, app.longitudinal;
  CHECK(is_rotation(m, 1e-12));
  CHECK(app.origin.norm() == 0.0);
}

TEST_CASE("collinear landmarks are rejected") {
  try {
    app_from_landmarks({0, 0, 0}, {100, 0, 0}, {50, 0.001, 0});
    FAIL("expected CollinearLandmarks");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CollinearLandmarks);
  }
}

TEST_CASE("cup angles invert cup_axis_from_angles over the clinical domain") {
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const APPFrame app = rotated_app(rng);
    for (double abd = 0.0; abd <= 89.0; abd += 1.0) {
      for (double ant = -45.0; ant <= 45.0; ant += 1.0) {
        const CupOrientation c = cup_angles(cup_axis_from_angles({abd, ant}, app), app);
        worst = std::max({worst, std::abs(c.abduction_deg - abd), std::abs(c.anteversion_deg - ant)});
      }
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("cup angles agree with a direct geometric construction") {
  // anteversion: angle between axis and the coronal plane; abduction: angle
  // of the coronal projection from the longitudinal axis
  const APPFrame app = app_from_landmarks({-115, 0, 0}, {115, 0, 0}, {0, 0, -95});
  const Vec3 axis = Vec3(0.5, 0.3, 0.6).normalized();
  const CupOrientation c = cup_angles(axis, app);
  const Vec3 proj(axis.x(), 0.0, axis.z());
  CHECK(c.anteversion_deg == doctest::Approx(rad2deg(std::asin(axis.y()))));
  CHECK(c.abduction_deg ==
        doctest::Approx(rad2deg(std::acos(proj.normalized().dot(Vec3::UnitZ())))));
  // axis sign does not matter
  const CupOrientation flipped = cup_angles(-axis, app);
  CHECK(flipped == c);
}

TEST_CASE("operative convention") {
  const APPFrame app = app_from_landmarks({-115, 0, 0}, {115, 0, 0}, {0, 0, -95});
  const Vec3 axis = Vec3(0.5, 0.3, 0.6).normalized();
  const CupOrientation c = cup_angles(axis, app, AngleConvention::Operative);
  CHECK(c.abduction_deg == doctest::Approx(rad2deg(std::asin(axis.x()))));
  CHECK(c.anteversion_deg == doctest::Approx(rad2deg(std::atan2(axis.y(), axis.z()))));
}

TEST_CASE("degenerate cup axes") {
  const APPFrame app = app_from_landmarks({-115, 0, 0}, {115, 0, 0}, {0, 0, -95});
  try {
    cup_angles(Vec3::UnitY(), app);
    FAIL("expected DegenerateProjection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateProjection);
  }
  CHECK_THROWS_AS(cup_angles(Vec3(0, 0, 2), app), Error);
}

TEST_CASE("safe zone is closed") {
  CHECK(in_safe_zone(kTargetCup));
  CHECK(kTargetCup.abduction_deg == 40.0);
  CHECK(kTargetCup.anteversion_deg == 15.0);
  CHECK(in_safe_zone({30.0, 5.0}));
  CHECK(in_safe_zone({50.0, 25.0}));
  CHECK_FALSE(in_safe_zone({29.999, 15.0}));
  CHECK_FALSE(in_safe_zone({40.0, 25.001}));
  CHECK_FALSE(in_safe_zone({40.0, 4.0}));
}

TEST_CASE("K-wire error on the tube end planes") {
  const TubePhantomSpec tube{{0, 0, 0}, {100, 0, 0}, 10.0};
  // on axis
  KWireError e = kwire_error({{-20, 0, 0}, {1, 0, 0}, 0}, tube);
  CHECK(e.entry_dist == doctest::Approx(0.0));
  CHECK(e.exit_dist == doctest::Approx(0.0));
  CHECK_FALSE(e.breached);
  // parallel offset of 3 mm: 3 > 5 - 1.4 = 3.6 is false
  e = kwire_error({{0, 3, 0}, {1, 0, 0}, 0}, tube);
  CHECK(e.mean == doctest::Approx(3.0));
  CHECK_FALSE(e.breached);
  e = kwire_error({{0, 0, 3.7}, {-1, 0, 0}, 0}, tube);
  CHECK(e.breached);
  // tilted: entry at centre, exit 5 mm off
  e = kwire_error({{0, 0, 0}, Vec3(100, 5, 0).normalized(), 0}, tube);
  CHECK(e.entry_dist == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(e.exit_dist == doctest::Approx(5.0));
  CHECK(e.mean == doctest::Approx(2.5));
  CHECK(e.breached);
  // thinner wire tolerates more
  CHECK_FALSE(kwire_error({{0, 3.7, 0}, {1, 0, 0}, 0}, tube, 1.0).breached);

  try {
    kwire_error({{0, 0, 0}, Vec3(0.001, 1, 0).normalized(), 0}, tube);
    FAIL("expected NoCrossing");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::NoCrossing);
  }
  CHECK_THROWS_AS(kwire_error({{0, 0, 0}, {1, 0, 0}, 0}, {{0, 0, 0}, {0, 0, 0}, 10.0}), Error);
}
