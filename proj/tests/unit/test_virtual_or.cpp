#include <doctest.h>

#include <frustum/error.hpp>
#include <frustum/virtual_or.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace frustum;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::BadRequest;
}

SessionConfig quiet_config() {
  SessionConfig c;
  c.localizer = LocalizerModel::noiseless();
  c.pixel_noise_sigma = 0.0;
  c.seed = 3;
  return c;
}

Session tube_session(const SessionConfig& config) {
  return open_session("t", build_phantom(PhantomKind::TubeInCube), config, default_hand_eye());
}

// Two views, entry/exit on both, trajectory plan, execution.
void kwire_workflow(Session& s) {
  acquire(s, look_at({0, -600, 0}, {0, 0, 0}, Vec3::UnitZ()));
  acquire(s, look_at({0, 0, 600}, {0, 0, 0}, Vec3::UnitX()));
  std::array<int, 4> ids{};
  for (int k = 0; k < 2; ++k) {
    ids[2 * k] = annotate(s, {k, s.shots[k].landmark("tube_entry").pixel, AnnotationLabel::Entry});
    ids[2 * k + 1] = annotate(s, {k, s.shots[k].landmark("tube_exit").pixel, AnnotationLabel::Exit});
  }
  const Trajectory3D t = plan_trajectory(s, ids).trajectory;
  execute(s, ToolKind::KWire, t);
}

}  // namespace

TEST_CASE("phantom defaults") {
  const Phantom tube = build_phantom(PhantomKind::TubeInCube);
  REQUIRE(tube.tube.has_value());
  CHECK(tube.tube->diameter == 10.0);
  CHECK(tube.landmarks.size() == 10);
  CHECK(tube.landmark_index("tube_exit") == 9);
  CHECK(code_of([&] { tube.landmark_index("femur"); }) == ErrorCode::NotFound);

  const Phantom pelvis = build_phantom(PhantomKind::PelvisLandmarks);
  CHECK_FALSE(pelvis.tube.has_value());
  const APPFrame app = pelvis.app_or();
  CHECK(app.lateral.cross(app.anterior).dot(app.longitudinal) == doctest::Approx(1.0));
  CHECK(code_of([&] { pelvis.tube_or(); }) == ErrorCode::InvalidParams);

  PhantomParams bad;
  bad.tube_end = bad.tube_start;
  CHECK(code_of([&] { build_phantom(PhantomKind::TubeInCube, bad); }) == ErrorCode::InvalidParams);
  PhantomParams outside;
  outside.tube_end = Vec3(50, 0, 0);
  CHECK(code_of([&] { build_phantom(PhantomKind::TubeInCube, outside); }) ==
        ErrorCode::InvalidParams);
}

TEST_CASE("localizer noise matches the configured mean norms") {
  const LocalizerModel m;
  std::mt19937_64 rng(51);
  double rot = 0.0, trans = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const RigidTransform e = sample_localizer_noise(m, rng);
    rot += rotation_angle_deg(e.rotation());
    trans += e.translation().norm();
  }
  CHECK(std::abs(rot / n - 0.75) < 0.05 * 0.75);
  CHECK(std::abs(trans / n - 8.0) < 0.05 * 8.0);
}

TEST_CASE("expected Gaussian norm") {
  // isotropic case has the closed form sigma * 2 sqrt(2 / pi)
  CHECK(expected_gaussian_norm(Vec3(1, 1, 1)) ==
        doctest::Approx(2.0 * std::sqrt(2.0 / kPi)).epsilon(1e-6));
  // one nonzero axis is a folded normal
  CHECK(expected_gaussian_norm(Vec3(0, 3, 0)) ==
        doctest::Approx(3.0 * std::sqrt(2.0 / kPi)).epsilon(1e-4));
}

TEST_CASE("localizer validation") {
  LocalizerModel m;
  m.per_axis_trans = Vec3(1, 1, 1);
  CHECK(code_of([&] { m.validate(); }) == ErrorCode::InvalidParams);
  LocalizerModel neg;
  neg.rot_noise_norm_deg = -1;
  CHECK_THROWS_AS(neg.validate(), Error);
  CHECK_NOTHROW(LocalizerModel::noiseless().validate());
  CHECK(LocalizerModel().scaled(0.5).trans_noise_norm_mm == 4.0);
}

TEST_CASE("noiseless acquisition measures the true pose") {
  Session s = tube_session(quiet_config());
  const RigidTransform pose = look_at({0, -600, 0}, {0, 0, 0}, Vec3::UnitZ());
  const SyntheticShot& shot = acquire(s, pose);
  CHECK((shot.frustum.source_pose.matrix() - pose.matrix()).norm() < 1e-9);
  CHECK(shot.frustum.near_plane == shot.frustum.intrinsics.focal_length);
  for (const auto& l : shot.landmarks) {
    REQUIRE(l.visible);
    const Vec2 px = project(shot.frustum.intrinsics, invert(pose), s.phantom.landmark_or(l.name));
    CHECK((px - l.pixel).norm() < 1e-9);
  }
  CHECK(s.dose() == doctest::Approx(kDosePerShot));
}

TEST_CASE("landmarks behind the source are invisible") {
  Session s = tube_session(quiet_config());
  // source inside the cube, looking away from the tube exit
  const SyntheticShot& shot = acquire(s, look_at({0, 0, 0}, {-100, 0, 0}, Vec3::UnitZ()));
  CHECK_FALSE(shot.landmark("tube_exit").visible);
  CHECK(shot.landmark("tube_exit").pixel == Vec2::Zero());
}

TEST_CASE("noisy landmarks stay near their true reprojection") {
  SessionConfig c;
  c.pixel_noise_sigma = 1.5;
  c.seed = 8;
  Session s = tube_session(c);
  int total = 0, within = 0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int k = 0; k < 40; ++k) {
    const Vec3 dir = Vec3(u(rng), -1.0, u(rng)).normalized();
    const RigidTransform pose = look_at(600.0 * dir, {0, 0, 0}, Vec3::UnitZ());
    const SyntheticShot& shot = acquire(s, pose);
    for (const auto& l : shot.landmarks) {
      if (!l.visible) continue;
      ++total;
      const Vec2 px = project(shot.frustum.intrinsics, invert(pose), s.phantom.landmark_or(l.name));
      within += (px - l.pixel).norm() <= 3.0 * 1.5;
    }
  }
  // 2D isotropic Gaussian: P(|e| <= 3 sigma) = 1 - exp(-4.5) (Rayleigh); allow
  // three binomial standard deviations
  const double p = 1.0 - std::exp(-4.5);
  const double frac = static_cast<double>(within) / total;
  CHECK(std::abs(frac - p) <= 3.0 * std::sqrt(p * (1.0 - p) / total));
  CHECK(s.dose() == doctest::Approx(40 * kDosePerShot));
}

TEST_CASE("event log is ordered with one event per mutation") {
  Session s = tube_session(quiet_config());
  kwire_workflow(s);
  set_near_plane(s, 0, 400.0);
  REQUIRE(s.events.size() == 10);
  const EventKind expect[] = {EventKind::Create,   EventKind::Acquire,  EventKind::Acquire,
                              EventKind::Annotate, EventKind::Annotate, EventKind::Annotate,
                              EventKind::Annotate, EventKind::Plan,     EventKind::Execute,
                              EventKind::SetNearPlane};
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    CHECK(s.events[i].kind == expect[i]);
    if (i > 0) CHECK(s.events[i].t > s.events[i - 1].t);
  }
  CHECK(s.shots[0].frustum.near_plane == 400.0);
  CHECK(code_of([&] { set_near_plane(s, 0, 1200.0); }) == ErrorCode::NearPlaneOutOfRange);
  CHECK(s.events.size() == 10);  // rejected mutations leave no trace
  CHECK(code_of([&] { annotate(s, {7, {1, 1}, AnnotationLabel::Entry}); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { annotate(s, {0, {1, 1}, AnnotationLabel::Entry}); }) ==
        ErrorCode::InvalidParams);

  const SessionMetrics m = session_metrics(s);
  REQUIRE(m.executed_kwire.has_value());
  CHECK(m.executed_kwire->mean < 1e-9);
  CHECK(m.shots == 2);
  CHECK(m.dose == doctest::Approx(0.255));
}

TEST_CASE("session files round trip and replay byte for byte") {
  SessionConfig c;
  c.pixel_noise_sigma = 0.8;
  c.seed = 17;
  Session s = tube_session(c);
  kwire_workflow(s);
  set_near_plane(s, 1, 250.0);
  const auto tool = VirtualTool::make(
      ToolKind::KWire, RigidTransform(rot_y_deg(90), Vec3(-40, 0, 0), FrameId::Tool, FrameId::OR));
  plan_tool(s, tool, {0, 1},
            {{s.annotations[0].point, s.annotations[1].point},
             {s.annotations[2].point, s.annotations[3].point}});

  const std::string text = serialize_session(s);
  const Session parsed = parse_session(text);
  CHECK(serialize_session(parsed) == text);
  const Session replayed = replay(text);
  CHECK(serialize_session(replayed) == text);
  CHECK(std::get<TrajectoryPlan>(replayed.plans[0]).trajectory ==
        std::get<TrajectoryPlan>(s.plans[0]).trajectory);
}

TEST_CASE("corrupt and foreign session files are rejected") {
  Session s = tube_session(quiet_config());
  kwire_workflow(s);
  const std::string text = serialize_session(s);

  CHECK(code_of([&] { replay(text.substr(0, text.size() / 2)); }) == ErrorCode::CorruptLog);

  std::string tampered = text;
  const auto pos = tampered.find("\"near_plane\": 1000");
  REQUIRE(pos != std::string::npos);
  tampered.replace(pos, 18, "\"near_plane\": 999");
  CHECK(code_of([&] { replay(tampered); }) == ErrorCode::CorruptLog);

  std::string foreign = text;
  foreign.replace(foreign.find("frustum-session/v1"), 18, "frustum-session/v9");
  CHECK(code_of([&] { replay(foreign); }) == ErrorCode::SchemaMismatch);

  CHECK(code_of([&] { replay_file("/nonexistent/session.json"); }) == ErrorCode::NotFound);
}

TEST_CASE("saved sessions replay from disk") {
  Session s = tube_session(quiet_config());
  kwire_workflow(s);
  const auto dir = std::filesystem::temp_directory_path() / "frustum_unit_sessions";
  std::filesystem::remove_all(dir);
  const std::string path = (dir / "s.json").string();
  save_session(s, path);
  CHECK(serialize_session(replay_file(path)) == serialize_session(s));
  std::filesystem::remove_all(dir);
}

TEST_CASE("shot images are PNG") {
  Session s = tube_session(quiet_config());
  const SyntheticShot& shot = acquire(s, look_at({0, -600, 0}, {0, 0, 0}, Vec3::UnitZ()));
  const auto png = render_shot_png(shot, shot.frustum.intrinsics);
  REQUIRE(png.size() > 8);
  CHECK(png[0] == 0x89);
  CHECK(png[1] == 'P');
  CHECK(png[2] == 'N');
  CHECK(png[3] == 'G');
}
