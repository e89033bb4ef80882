#include <doctest.h>

#include <frustum/error.hpp>
#include <frustum/geom.hpp>

#include "oracles.hpp"

#include <random>

using namespace frustum;

namespace {

Vec3 random_axis(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

}  // namespace

TEST_CASE("exp_so3 matches the matrix power series and Rodrigues") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0.0, 3.1);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = random_axis(rng);
    const double a = ang(rng);
    const Mat3 r = exp_so3(a * axis);
    CHECK((r - oracle::expm_series(skew(a * axis))).norm() < 1e-12);
    CHECK((r - oracle::rodrigues(axis, a)).norm() < 1e-12);
    CHECK(is_rotation(r));
  }
  CHECK(exp_so3(Vec3::Zero()) == Mat3::Identity());
}

TEST_CASE("log_so3 inverts exp_so3 and agrees with the trace angle") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ang(0.05, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w = ang(rng) * random_axis(rng);
    const Mat3 r = oracle::rodrigues(w.normalized(), w.norm());
    CHECK((log_so3(r) - w).norm() < 1e-9);
    CHECK(rotation_angle(r) == doctest::Approx(oracle::trace_angle(r)).epsilon(1e-9));
  }
  // tiny angles stay accurate where the trace formula loses digits
  CHECK(rotation_angle(exp_so3(Vec3(1e-10, 0, 0))) == doctest::Approx(1e-10).epsilon(1e-6));
}

TEST_CASE("skew builds the cross-product matrix") {
  const Vec3 a(1, -2, 3), b(0.5, 4, -1);
  CHECK((skew(a) * b - a.cross(b)).norm() < 1e-15);
  CHECK((skew(a) + skew(a).transpose()).norm() == 0.0);
}

TEST_CASE("unit quaternions are canonical and compose like rotations") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Mat3 ra = exp_so3(2.5 * random_axis(rng));
    const Mat3 rb = exp_so3(2.5 * random_axis(rng));
    const auto qa = UnitQuaternion::from_rotation(ra);
    const auto qb = UnitQuaternion::from_rotation(rb);
    CHECK(qa.s() >= 0.0);
    CHECK(std::abs(qa.coeffs().norm() - 1.0) < 1e-14);
    CHECK(((qa * qb).rotation() - ra * rb).norm() < 1e-12);
    CHECK((qa.rotation() - ra).norm() < 1e-12);
    const UnitQuaternion neg(-qa.s(), -qa.v());
    CHECK((neg.coeffs() - qa.coeffs()).norm() < 1e-15);
  }
  CHECK_THROWS_AS(UnitQuaternion(0.0, Vec3::Zero()), Error);
  CHECK(UnitQuaternion::from_axis_angle_deg(Vec3::UnitZ(), 90.0).angle() ==
        doctest::Approx(kPi / 2));
}

TEST_CASE("rigid transforms check frames on composition") {
  const RigidTransform a(rot_z_deg(30), Vec3(1, 2, 3), FrameId::H, FrameId::OR);
  const RigidTransform b(rot_x_deg(-20), Vec3(-4, 0, 2), FrameId::X, FrameId::H);
  const RigidTransform ab = compose(a, b);
  CHECK(ab.from() == FrameId::X);
  CHECK(ab.to() == FrameId::OR);
  const Vec3 p(5, -6, 7);
  CHECK((ab.apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  CHECK((ab.matrix() - a.matrix() * b.matrix()).norm() < 1e-12);
  CHECK_THROWS_AS(compose(b, a), Error);
  try {
    compose(b, a);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FrameMismatch);
  }
  const RigidTransform inv = invert(a);
  CHECK(inv.from() == FrameId::OR);
  CHECK((compose(inv, a).matrix() - Mat4::Identity()).norm() < 1e-12);
  CHECK_THROWS_AS(RigidTransform(2.0 * Mat3::Identity(), Vec3::Zero(), FrameId::X, FrameId::OR),
                  Error);
}

TEST_CASE("look_at points +z at the target") {
  const Vec3 src(100, -400, 250), tgt(5, 10, -20);
  const RigidTransform t = look_at(src, tgt, Vec3::UnitZ());
  CHECK(t.from() == FrameId::X);
  CHECK(t.to() == FrameId::OR);
  CHECK((t.translation() - src).norm() < 1e-12);
  CHECK((t.rotation().col(2) - (tgt - src).normalized()).norm() < 1e-12);
  CHECK(is_rotation(t.rotation()));
}

TEST_CASE("projection through the intrinsics matrix") {
  CameraIntrinsics k;
  const RigidTransform src = look_at(Vec3(0, 0, -800), Vec3::Zero(), Vec3::UnitY());
  const RigidTransform w = invert(src);
  const Vec3 x(10, -20, 30);
  const Vec3 xc = w.apply(x);
  const Vec3 h = k.matrix() * xc;
  const Vec2 px = project(k, w, x);
  CHECK((px - h.head<2>() / h.z()).norm() < 1e-12);
  CHECK((project(k, w, Vec3::Zero()) - k.principal_point).norm() < 1e-9);
  CHECK_FALSE(try_project(k, w, Vec3(0, 0, -900)).has_value());
  CHECK_THROWS_AS(project(k, w, Vec3(0, 0, -900)), Error);
  CHECK_THROWS_AS(project(k, src, x), Error);  // wrong direction
}

TEST_CASE("intrinsics validation and bounds") {
  CameraIntrinsics k;
  CHECK_NOTHROW(k.validate());
  CHECK(k.in_bounds(Vec2(0, 0)));
  CHECK(k.in_bounds(Vec2(1024, 1024)));
  CHECK_FALSE(k.in_bounds(Vec2(-0.1, 3)));
  k.pixel_pitch = 0.0;
  CHECK_THROWS_AS(k.validate(), Error);
}

TEST_CASE("frame names round trip") {
  for (auto f : {FrameId::OR, FrameId::X, FrameId::H, FrameId::IR, FrameId::S, FrameId::I,
                 FrameId::D, FrameId::P, FrameId::Tool}) {
    CHECK(parse_frame(frame_name(f)) == f);
  }
  CHECK_THROWS_AS(parse_frame("nowhere"), Error);
}
