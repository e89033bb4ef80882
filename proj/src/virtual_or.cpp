#include "frustum/virtual_or.hpp"

#include "frustum/error.hpp"
#include "sampling.hpp"
#include "session_internal.hpp"

#include <cmath>
#include <set>
#include <string>

namespace frustum {

namespace {

constexpr std::string_view kAsisLeft = "asis_left";
constexpr std::string_view kAsisRight = "asis_right";
constexpr std::string_view kPubis = "pubis";

std::int64_t tick(Session& s) { return ++s.clock; }

void log_event(Session& s, EventKind kind, int index, double near_plane = 0.0) {
  Event e;
  e.t = tick(s);
  e.kind = kind;
  e.index = index;
  e.near_plane = near_plane;
  s.events.push_back(e);
}

std::seed_seq shot_seed(std::uint64_t session_seed, std::size_t shot, std::uint64_t localizer_seed) {
  return std::seed_seq{static_cast<std::uint32_t>(session_seed),
                       static_cast<std::uint32_t>(session_seed >> 32),
                       static_cast<std::uint32_t>(shot),
                       static_cast<std::uint32_t>(localizer_seed),
                       static_cast<std::uint32_t>(localizer_seed >> 32)};
}

}  // namespace

// --- names ------------------------------------------------------------------

std::string_view phantom_kind_name(PhantomKind kind) noexcept {
  return kind == PhantomKind::TubeInCube ? "tube_in_cube" : "pelvis_landmarks";
}

PhantomKind parse_phantom_kind(std::string_view name) {
  if (name == "tube_in_cube") return PhantomKind::TubeInCube;
  if (name == "pelvis_landmarks") return PhantomKind::PelvisLandmarks;
  throw Error(ErrorCode::InvalidParams, "unknown phantom kind '" + std::string(name) + "'");
}

std::string_view event_kind_name(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::Create: return "create";
    case EventKind::Acquire: return "acquire";
    case EventKind::Annotate: return "annotate";
    case EventKind::SetNearPlane: return "set_near_plane";
    case EventKind::Plan: return "plan";
    case EventKind::Execute: return "execute";
  }
  return "create";
}

EventKind parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::Create, EventKind::Acquire, EventKind::Annotate,
                 EventKind::SetNearPlane, EventKind::Plan, EventKind::Execute}) {
    if (event_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidParams, "unknown event kind '" + std::string(name) + "'");
}

// --- phantoms ---------------------------------------------------------------

void Phantom::validate() const {
  std::set<std::string> names;
  for (const auto& l : landmarks) {
    if (!names.insert(l.name).second) {
      throw Error(ErrorCode::InvalidParams, "duplicate landmark '" + l.name + "'");
    }
  }
  if (tube.has_value() != (kind == PhantomKind::TubeInCube)) {
    throw Error(ErrorCode::InvalidParams, "a tube is present iff the phantom is tube_in_cube");
  }
  if (tube) tube->validate();
  if (pose.from() != FrameId::P || pose.to() != FrameId::OR) {
    throw Error(ErrorCode::FrameMismatch, "phantom pose must map P -> OR");
  }
}

int Phantom::landmark_index(std::string_view name) const {
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    if (landmarks[i].name == name) return static_cast<int>(i);
  }
  throw Error(ErrorCode::NotFound, "no landmark '" + std::string(name) + "'");
}

Vec3 Phantom::landmark_or(std::string_view name) const {
  return pose.apply(landmarks[static_cast<std::size_t>(landmark_index(name))].position);
}

TubePhantomSpec Phantom::tube_or() const {
  if (!tube) throw Error(ErrorCode::InvalidParams, "phantom has no tube");
  return {pose.apply(tube->axis_start), pose.apply(tube->axis_end), tube->diameter};
}

APPFrame Phantom::app_or() const {
  return app_from_landmarks(landmark_or(kAsisLeft), landmark_or(kAsisRight), landmark_or(kPubis));
}

Phantom build_phantom(PhantomKind kind, const PhantomParams& params) {
  Phantom p;
  p.kind = kind;
  p.pose = params.pose.with_frames(FrameId::P, FrameId::OR);
  if (kind == PhantomKind::TubeInCube) {
    const double h = 0.5 * params.cube_size;
    if (!(params.cube_size > 0.0)) throw Error(ErrorCode::InvalidParams, "cube size must be > 0");
    if (!(params.tube_diameter > 0.0)) {
      throw Error(ErrorCode::InvalidParams, "tube diameter must be > 0");
    }
    if (!((params.tube_end - params.tube_start).norm() > 0.0)) {
      throw Error(ErrorCode::InvalidParams, "tube has zero length");
    }
    if (params.tube_start.cwiseAbs().maxCoeff() > h || params.tube_end.cwiseAbs().maxCoeff() > h) {
      throw Error(ErrorCode::InvalidParams, "tube must lie inside the cube");
    }
    for (int i = 0; i < 8; ++i) {
      const Vec3 c((i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h);
      p.landmarks.push_back({"corner_" + std::to_string(i), c});
    }
    p.landmarks.push_back({"tube_entry", params.tube_start});
    p.landmarks.push_back({"tube_exit", params.tube_end});
    p.tube = TubePhantomSpec{params.tube_start, params.tube_end, params.tube_diameter};
  } else {
    if (!(params.asis_width > 0.0) || !(params.pubis_drop > 0.0)) {
      throw Error(ErrorCode::InvalidParams, "pelvis dimensions must be > 0");
    }
    const double w = 0.5 * params.asis_width;
    p.landmarks.push_back({std::string(kAsisLeft), {-w, 0.0, 0.0}});
    p.landmarks.push_back({std::string(kAsisRight), {w, 0.0, 0.0}});
    p.landmarks.push_back({std::string(kPubis), {0.0, 0.0, -params.pubis_drop}});
    p.landmarks.push_back({"acetabulum", params.acetabulum});
  }
  p.validate();
  return p;
}

// --- localizer ----------------------------------------------------------------

void LocalizerModel::validate() const {
  if (!(rot_noise_norm_deg >= 0.0) || !(trans_noise_norm_mm >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "localizer noise norms must be >= 0");
  }
  if ((per_axis_trans.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidParams, "per-axis translation noise must be >= 0");
  }
  if (trans_noise_norm_mm > 0.0 &&
      std::abs(per_axis_trans.norm() - trans_noise_norm_mm) > 0.1 * trans_noise_norm_mm) {
    throw Error(ErrorCode::InvalidParams,
                "per-axis translation noise is inconsistent with its norm (> 10%)");
  }
}

LocalizerModel LocalizerModel::scaled(double factor) const {
  LocalizerModel out = *this;
  out.rot_noise_norm_deg *= factor;
  out.trans_noise_norm_mm *= factor;
  out.per_axis_trans *= factor;
  return out;
}

double expected_gaussian_norm(const Vec3& sigma) {
  // E|diag(sigma) z| = E|z| * mean over the unit sphere of |diag(sigma) w|,
  // integrated with the midpoint rule in (cos theta, phi).
  constexpr int kU = 256;
  constexpr int kPhi = 256;
  double sum = 0.0;
  for (int i = 0; i < kU; ++i) {
    const double u = -1.0 + (i + 0.5) * 2.0 / kU;
    const double r = std::sqrt(1.0 - u * u);
    for (int j = 0; j < kPhi; ++j) {
      const double phi = (j + 0.5) * 2.0 * kPi / kPhi;
      const Vec3 w(r * std::cos(phi), r * std::sin(phi), u);
      sum += sigma.cwiseProduct(w).norm();
    }
  }
  return std::sqrt(8.0 / kPi) * sum / (kU * kPhi);
}

RigidTransform sample_localizer_noise(const LocalizerModel& model, std::mt19937_64& rng) {
  const Vec3 axis = detail::random_unit_vector(rng);
  const double g = std::normal_distribution<double>(0.0, 1.0)(rng);
  const Vec3 z = detail::gaussian3(rng);

  const double rot_sigma = model.rot_noise_norm_deg / std::sqrt(2.0 / kPi);
  const Mat3 r = exp_so3(deg2rad(rot_sigma * std::abs(g)) * axis);

  Vec3 t = Vec3::Zero();
  if (model.trans_noise_norm_mm > 0.0) {
    const double k = model.trans_noise_norm_mm / expected_gaussian_norm(model.per_axis_trans);
    t = k * model.per_axis_trans.cwiseProduct(z);
  }
  return {r, t, FrameId::OR, FrameId::OR};
}

// --- session ----------------------------------------------------------------

const LandmarkObservation& SyntheticShot::landmark(std::string_view name) const {
  for (const auto& l : landmarks) {
    if (l.name == name) return l;
  }
  throw Error(ErrorCode::NotFound, "shot has no landmark '" + std::string(name) + "'");
}

const SyntheticShot& Session::shot(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= shots.size()) {
    throw Error(ErrorCode::NotFound, "no shot " + std::to_string(index));
  }
  return shots[static_cast<std::size_t>(index)];
}

const Annotation& Session::annotation(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= annotations.size()) {
    throw Error(ErrorCode::NotFound, "no annotation " + std::to_string(index));
  }
  return annotations[static_cast<std::size_t>(index)];
}

Session open_session(std::string id, Phantom phantom, const SessionConfig& config,
                     const RigidTransform& true_hand_eye,
                     std::optional<CalibrationResult> calibration) {
  if (id.empty()) throw Error(ErrorCode::InvalidParams, "session id is empty");
  phantom.validate();
  config.localizer.validate();
  config.intrinsics.validate();
  if (!(config.pixel_noise_sigma >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "pixel noise must be >= 0");
  }
  if (true_hand_eye.from() != FrameId::H || true_hand_eye.to() != FrameId::X) {
    throw Error(ErrorCode::FrameMismatch, "hand-eye transform must map H -> X");
  }
  Session s;
  s.id = std::move(id);
  s.config = config;
  s.phantom = std::move(phantom);
  s.true_hand_eye = true_hand_eye;
  if (calibration) {
    if (calibration->x.from() != FrameId::H || calibration->x.to() != FrameId::X) {
      throw Error(ErrorCode::FrameMismatch, "calibration must map H -> X");
    }
    s.calibration = *calibration;
  } else {
    s.calibration.x = true_hand_eye;
  }
  log_event(s, EventKind::Create, -1);
  return s;
}

const SyntheticShot& acquire(Session& session, const RigidTransform& commanded_pose,
                             const LocalizerModel& localizer, double pixel_noise_sigma) {
  if (commanded_pose.from() != FrameId::X || commanded_pose.to() != FrameId::OR) {
    throw Error(ErrorCode::FrameMismatch, "commanded pose must map X -> OR");
  }
  localizer.validate();
  if (!(pixel_noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidParams, "pixel noise must be >= 0");

  const std::size_t k = session.shots.size();
  auto seq = shot_seed(session.config.seed, k, localizer.seed);
  detail::Rng rng(seq);

  // tracker pose as localized in OR (error expressed in the tracker frame),
  // mapped back to the source through the calibration in use
  const RigidTransform noise =
      sample_localizer_noise(localizer, rng).with_frames(FrameId::H, FrameId::H);
  const RigidTransform tracker = compose(compose(commanded_pose, session.true_hand_eye), noise);
  const RigidTransform measured = compose(tracker, invert(session.calibration.x));

  const CameraIntrinsics& intr = session.config.intrinsics;
  SyntheticShot shot;
  shot.true_source_pose = commanded_pose;
  shot.pixel_noise_sigma = pixel_noise_sigma;
  shot.dose = kDosePerShot;
  shot.frustum.intrinsics = intr;
  shot.frustum.source_pose = measured;
  shot.frustum.near_plane = intr.focal_length;

  const RigidTransform or_to_x = invert(commanded_pose);
  for (const auto& l : session.phantom.landmarks) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double du = n01(rng);
    const double dv = n01(rng);
    LandmarkObservation obs;
    obs.name = l.name;
    auto px = try_project(intr, or_to_x, session.phantom.pose.apply(l.position));
    if (px && intr.in_bounds(*px)) {
      const Vec2 noisy = *px + pixel_noise_sigma * Vec2(du, dv);
      if (intr.in_bounds(noisy)) {
        obs.pixel = noisy;
        obs.visible = true;
      }
    }
    shot.landmarks.push_back(obs);
  }
  return detail::append_shot(session, std::move(shot));
}

const SyntheticShot& acquire(Session& session, const RigidTransform& commanded_pose) {
  return acquire(session, commanded_pose, session.config.localizer,
                 session.config.pixel_noise_sigma);
}

namespace detail {

const SyntheticShot& append_shot(Session& session, SyntheticShot shot) {
  const int k = static_cast<int>(session.shots.size());
  shot.frustum.near_plane = shot.frustum.intrinsics.focal_length;
  log_event(session, EventKind::Acquire, k);
  shot.frustum.image.timestamp_ms = session.events.back().t;
  shot.frustum.image.path = session.id + "/shot_" + std::to_string(k) + ".png";
  shot.frustum.validate();
  session.shots.push_back(std::move(shot));
  return session.shots.back();
}

}  // namespace detail

int annotate(Session& session, Annotation annotation) {
  const SyntheticShot& shot = session.shot(annotation.frustum_id);
  if (!shot.frustum.intrinsics.in_bounds(annotation.point)) {
    throw Error(ErrorCode::InvalidParams, "annotation outside the image");
  }
  if (annotation.label == AnnotationLabel::Landmark && annotation.landmark < 0) {
    throw Error(ErrorCode::InvalidParams, "landmark annotations need a landmark index");
  }
  if (annotation.label != AnnotationLabel::Landmark) annotation.landmark = -1;
  for (const auto& a : session.annotations) {
    if (a.frustum_id == annotation.frustum_id && a.label == annotation.label &&
        a.landmark == annotation.landmark) {
      throw Error(ErrorCode::InvalidParams, "shot already has this annotation label");
    }
  }
  const int index = static_cast<int>(session.annotations.size());
  log_event(session, EventKind::Annotate, index);
  annotation.timestamp_ms = session.events.back().t;
  session.annotations.push_back(std::move(annotation));
  return index;
}

RigidTransform set_near_plane(Session& session, int shot, double n) {
  session.shot(shot);
  FlyingFrustum fr = session.shots[static_cast<std::size_t>(shot)].frustum;
  fr.near_plane = n;
  const RigidTransform pose = image_pose(fr);  // validates the range
  session.shots[static_cast<std::size_t>(shot)].frustum.near_plane = n;
  log_event(session, EventKind::SetNearPlane, shot, n);
  return pose;
}

const TrajectoryPlan& plan_trajectory(Session& session, const std::array<int, 4>& ids) {
  const Annotation& entry_i = session.annotation(ids[0]);
  const Annotation& exit_i = session.annotation(ids[1]);
  const Annotation& entry_j = session.annotation(ids[2]);
  const Annotation& exit_j = session.annotation(ids[3]);
  if (entry_i.label != AnnotationLabel::Entry || entry_j.label != AnnotationLabel::Entry ||
      exit_i.label != AnnotationLabel::Exit || exit_j.label != AnnotationLabel::Exit) {
    throw Error(ErrorCode::InvalidParams, "trajectory needs entry, exit, entry, exit annotations");
  }
  if (entry_i.frustum_id != exit_i.frustum_id || entry_j.frustum_id != exit_j.frustum_id) {
    throw Error(ErrorCode::InvalidParams, "entry and exit of one view must share a shot");
  }
  TrajectoryPlan plan;
  plan.annotations = ids;
  plan.trajectory =
      trajectory_from_frustum_pair(entry_i, exit_i, entry_j, exit_j,
                                   session.shot(entry_i.frustum_id).frustum,
                                   session.shot(entry_j.frustum_id).frustum);
  session.plans.emplace_back(plan);
  log_event(session, EventKind::Plan, static_cast<int>(session.plans.size()) - 1);
  return std::get<TrajectoryPlan>(session.plans.back());
}

const LandmarkPlan& plan_landmark(Session& session, const std::vector<int>& ids) {
  if (ids.size() < 2) throw Error(ErrorCode::InvalidParams, "landmark needs >= 2 annotations");
  std::vector<Ray> rays;
  for (int id : ids) {
    const Annotation& a = session.annotation(id);
    if (a.label != AnnotationLabel::Landmark) {
      throw Error(ErrorCode::InvalidParams, "landmark plans use landmark annotations");
    }
    rays.push_back(ray_from_annotation(session.shot(a.frustum_id).frustum, a));
  }
  const Triangulation tri = triangulate(rays);
  LandmarkPlan plan;
  plan.annotations = ids;
  plan.point = tri.point;
  plan.residual = tri.residual;
  session.plans.emplace_back(plan);
  log_event(session, EventKind::Plan, static_cast<int>(session.plans.size()) - 1);
  return std::get<LandmarkPlan>(session.plans.back());
}

const ToolPlan& plan_tool(Session& session, const VirtualTool& tool, const std::vector<int>& shots,
                          const std::vector<Polyline>& targets) {
  std::vector<FlyingFrustum> frustums;
  for (int k : shots) frustums.push_back(session.shot(k).frustum);
  ToolPlan plan;
  plan.tool = tool;
  plan.shots = shots;
  plan.targets = targets;
  plan.projections = project_tool(tool, frustums);
  plan.consensus = consensus_residual(tool, targets, frustums);
  session.plans.emplace_back(plan);
  log_event(session, EventKind::Plan, static_cast<int>(session.plans.size()) - 1);
  return std::get<ToolPlan>(session.plans.back());
}

const Execution& execute(Session& session, ToolKind kind, const Trajectory3D& placed) {
  Execution e;
  e.kind = kind;
  e.placed = placed;
  if (session.phantom.kind == PhantomKind::TubeInCube) {
    e.kwire = kwire_error(placed, session.phantom.tube_or());
  } else {
    e.cup = cup_angles(placed.direction.normalized(), session.phantom.app_or());
  }
  session.executions.push_back(e);
  log_event(session, EventKind::Execute, static_cast<int>(session.executions.size()) - 1);
  return session.executions.back();
}

SessionMetrics session_metrics(const Session& session) {
  SessionMetrics m;
  m.shots = static_cast<int>(session.shots.size());
  m.dose = session.dose();
  if (session.phantom.kind == PhantomKind::TubeInCube) {
    for (auto it = session.plans.rbegin(); it != session.plans.rend(); ++it) {
      if (const auto* p = std::get_if<TrajectoryPlan>(&*it)) {
        m.planned_kwire = kwire_error(p->trajectory, session.phantom.tube_or());
        break;
      }
    }
  }
  if (!session.executions.empty()) {
    m.executed_kwire = session.executions.back().kwire;
    m.executed_cup = session.executions.back().cup;
  }
  return m;
}

RigidTransform default_hand_eye() {
  return {rot_z_deg(90.0) * rot_x_deg(-15.0), Vec3(120.0, -60.0, 950.0), FrameId::H, FrameId::X};
}

}  // namespace frustum
