#pragma once

// Synthetic operating room: phantoms with ground truth, a virtual C-arm whose
// source pose is reported by a noisy localizer, event-sourced sessions, and
// the K-wire / total hip arthroplasty (THA) experiments.

#include "frustum/clinical.hpp"
#include "frustum/flying_frustum.hpp"
#include "frustum/handeye.hpp"
#include "frustum/planning.hpp"
#include "frustum/stats.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace frustum {

inline constexpr double kDosePerShot = 0.1275;  // cGy*cm^2, bookkeeping only

// ---------------------------------------------------------------------------
// Phantoms

enum class PhantomKind { TubeInCube, PelvisLandmarks };

std::string_view phantom_kind_name(PhantomKind kind) noexcept;
PhantomKind parse_phantom_kind(std::string_view name);

struct PhantomParams {
  // tube in cube
  double cube_size = 80.0;
  double tube_diameter = 10.0;
  Vec3 tube_start{-30.0, -6.0, -8.0};
  Vec3 tube_end{30.0, 6.0, 8.0};
  // pelvis, phantom frame = APP axes (x lateral, y anterior, z superior)
  double asis_width = 230.0;
  double pubis_drop = 95.0;
  Vec3 acetabulum{75.0, -35.0, -55.0};  // right hip centre

  RigidTransform pose = RigidTransform::identity(FrameId::P, FrameId::OR);
};

struct Landmark {
  std::string name;
  Vec3 position = Vec3::Zero();  // phantom frame

  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct Phantom {
  PhantomKind kind = PhantomKind::TubeInCube;
  std::vector<Landmark> landmarks;
  std::optional<TubePhantomSpec> tube;  // phantom frame
  RigidTransform pose = RigidTransform::identity(FrameId::P, FrameId::OR);

  void validate() const;
  int landmark_index(std::string_view name) const;  // NotFound if missing
  Vec3 landmark_or(std::string_view name) const;
  TubePhantomSpec tube_or() const;  // InvalidParams without a tube
  APPFrame app_or() const;          // ground-truth APP of a pelvis phantom
};

// Throws InvalidParams for degenerate parameters.
Phantom build_phantom(PhantomKind kind, const PhantomParams& params = {});

// ---------------------------------------------------------------------------
// Localizer

struct LocalizerModel {
  double rot_noise_norm_deg = 0.75;
  double trans_noise_norm_mm = 8.0;
  Vec3 per_axis_trans{4.0, 5.0, 4.8};
  std::uint64_t seed = 0;

  void validate() const;
  static LocalizerModel noiseless() { return {0.0, 0.0, {0.0, 0.0, 0.0}, 0}; }
  LocalizerModel scaled(double factor) const;

  friend bool operator==(const LocalizerModel&, const LocalizerModel&) = default;
};

// OR-frame perturbation: uniformly random axis with a folded-Gaussian angle
// whose mean is rot_noise_norm_deg, and per-axis Gaussian translation shaped
// like per_axis_trans whose mean norm is trans_noise_norm_mm.
RigidTransform sample_localizer_noise(const LocalizerModel& model, std::mt19937_64& rng);

// E|e| for e ~ N(0, diag(sigma^2)).
double expected_gaussian_norm(const Vec3& sigma);

// ---------------------------------------------------------------------------
// Session

struct LandmarkObservation {
  std::string name;
  Vec2 pixel = Vec2::Zero();
  bool visible = false;

  friend bool operator==(const LandmarkObservation&, const LandmarkObservation&) = default;
};

struct SyntheticShot {
  FlyingFrustum frustum;  // pose as measured by the localizer
  RigidTransform true_source_pose = RigidTransform::identity(FrameId::X, FrameId::OR);
  std::vector<LandmarkObservation> landmarks;
  double pixel_noise_sigma = 0.0;
  double dose = kDosePerShot;

  const LandmarkObservation& landmark(std::string_view name) const;
  friend bool operator==(const SyntheticShot&, const SyntheticShot&) = default;
};

struct TrajectoryPlan {
  std::array<int, 4> annotations{};  // entry_i, exit_i, entry_j, exit_j
  Trajectory3D trajectory;
  friend bool operator==(const TrajectoryPlan&, const TrajectoryPlan&) = default;
};

struct LandmarkPlan {
  std::vector<int> annotations;
  Vec3 point = Vec3::Zero();
  double residual = 0.0;
  friend bool operator==(const LandmarkPlan&, const LandmarkPlan&) = default;
};

struct ToolPlan {
  VirtualTool tool;
  std::vector<int> shots;
  std::vector<Polyline> targets;
  std::vector<ToolSilhouette> projections;
  double consensus = 0.0;
  friend bool operator==(const ToolPlan&, const ToolPlan&) = default;
};

using Plan = std::variant<TrajectoryPlan, LandmarkPlan, ToolPlan>;

struct Execution {
  ToolKind kind = ToolKind::KWire;
  Trajectory3D placed;  // wire line, or cup centre + cup axis
  std::optional<KWireError> kwire;
  std::optional<CupOrientation> cup;
  friend bool operator==(const Execution&, const Execution&) = default;
};

enum class EventKind { Create, Acquire, Annotate, SetNearPlane, Plan, Execute };

std::string_view event_kind_name(EventKind kind) noexcept;
EventKind parse_event_kind(std::string_view name);

struct Event {
  std::int64_t t = 0;
  EventKind kind = EventKind::Create;
  int index = -1;          // shot / annotation / plan / execution index
  double near_plane = 0.0;  // SetNearPlane only

  friend bool operator==(const Event&, const Event&) = default;
};

struct SessionConfig {
  LocalizerModel localizer;
  double pixel_noise_sigma = 0.0;
  CameraIntrinsics intrinsics;
  std::uint64_t seed = 0;
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

struct Session {
  std::string id;
  SessionConfig config;
  Phantom phantom;
  CalibrationResult calibration;  // ^X T_H in use
  RigidTransform true_hand_eye = RigidTransform::identity(FrameId::H, FrameId::X);
  std::vector<SyntheticShot> shots;
  std::vector<Annotation> annotations;
  std::vector<Plan> plans;
  std::vector<Execution> executions;
  std::vector<Event> events;
  std::int64_t clock = 0;

  double dose() const { return kDosePerShot * static_cast<double>(shots.size()); }
  const SyntheticShot& shot(int index) const;
  const Annotation& annotation(int index) const;
};

// Opens a session with its Create event. Calibration defaults to the truth.
Session open_session(std::string id, Phantom phantom, const SessionConfig& config,
                     const RigidTransform& true_hand_eye,
                     std::optional<CalibrationResult> calibration = std::nullopt);

// Commanded pose is the true ^OR T_X; the frustum carries the localized pose.
const SyntheticShot& acquire(Session& session, const RigidTransform& commanded_pose,
                             const LocalizerModel& localizer, double pixel_noise_sigma);
const SyntheticShot& acquire(Session& session, const RigidTransform& commanded_pose);

int annotate(Session& session, Annotation annotation);
RigidTransform set_near_plane(Session& session, int shot, double n);
const TrajectoryPlan& plan_trajectory(Session& session, const std::array<int, 4>& annotations);
const LandmarkPlan& plan_landmark(Session& session, const std::vector<int>& annotations);
const ToolPlan& plan_tool(Session& session, const VirtualTool& tool, const std::vector<int>& shots,
                          const std::vector<Polyline>& targets);
const Execution& execute(Session& session, ToolKind kind, const Trajectory3D& placed);

// Metrics of the latest execution, and of the latest trajectory plan against
// the phantom truth.
struct SessionMetrics {
  std::optional<KWireError> planned_kwire;
  std::optional<KWireError> executed_kwire;
  std::optional<CupOrientation> executed_cup;
  double dose = 0.0;
  int shots = 0;
};
SessionMetrics session_metrics(const Session& session);

// ---------------------------------------------------------------------------
// Persistence (schema frustum-session/v1)

inline constexpr std::string_view kSessionSchema = "frustum-session/v1";

std::string serialize_session(const Session& session);
// Parses and checks schema and content hash. Throws SchemaMismatch or
// CorruptLog.
Session parse_session(std::string_view text);
// Parses, then rebuilds the session from its event log, recomputing every
// deterministic result; throws CorruptLog when a logged result differs.
Session replay(std::string_view text);
// NotFound when the file does not exist.
Session replay_file(const std::string& path);
void save_session(const Session& session, const std::string& path);

// 8-bit grayscale PNG with the visible landmarks drawn as discs.
std::vector<unsigned char> render_shot_png(const SyntheticShot& shot,
                                           const CameraIntrinsics& intrinsics);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  std::vector<double> noise_scales{1.0};  // multiplies every noise source
  int repeats = 20;
  std::uint64_t seed = 1;
  LocalizerModel localizer;
  double pixel_noise_sigma = 1.0;
  NoiseModel calibration_error{0.2, 1.0, 0};  // residual hand-eye error
  double tremor_deg = 1.0;
  double tremor_mm = 1.0;
  CameraIntrinsics intrinsics;
  double source_distance = 600.0;
  int max_redraws = 20;
  bool keep_sessions = false;

  void validate() const;
};

struct ExperimentRow {
  double noise_scale = 0.0;
  int repeat = 0;
  int shots = 0;
  double dose = 0.0;
  int redraws = 0;
  std::vector<double> metrics;  // ordered as ExperimentReport::metric_names
};

struct ExperimentSummary {
  double noise_scale = 0.0;
  std::vector<MeanSd> metrics;
  int redraws = 0;
};

struct ExperimentReport {
  std::string name;
  std::vector<std::string> metric_names;
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentSummary> summary;
  std::vector<Session> sessions;  // only with keep_sessions

  std::string to_csv() const;
  const ExperimentSummary& at_scale(double noise_scale) const;
  int metric(std::string_view name) const;
};

ExperimentReport run_kwire_experiment(const ExperimentConfig& config);
ExperimentReport run_tha_experiment(const ExperimentConfig& config);

// Hand-eye transform shared by the experiments and the service defaults.
RigidTransform default_hand_eye();

}  // namespace frustum
