#include "frustum/virtual_or.hpp"

#include "frustum/error.hpp"
#include "sampling.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace frustum {

namespace {

using detail::Rng;

// Each repeat gets its own stream, shared by every noise scale so that the
// scales are compared on common random numbers.
Rng repeat_rng(std::uint64_t seed, int repeat, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(repeat), purpose};
  return Rng(seq);
}

std::uint64_t repeat_seed(std::uint64_t seed, int repeat) {
  Rng r = repeat_rng(seed, repeat, 0);
  return r();
}

Mat3 random_rotation(Rng& rng, double max_deg) {
  const Vec3 axis = detail::random_unit_vector(rng);
  return exp_so3(deg2rad(detail::uniform(rng, 0.0, max_deg)) * axis);
}

// Rotation by a folded Gaussian angle of mean-free scale sigma about a random
// axis; all draws happen even when sigma is zero.
Mat3 gaussian_rotation(Rng& rng, double sigma_deg) {
  const Vec3 axis = detail::random_unit_vector(rng);
  const double g = std::normal_distribution<double>(0.0, 1.0)(rng);
  return exp_so3(deg2rad(sigma_deg * g) * axis);
}

RigidTransform jittered_phantom_pose(Rng& rng) {
  const Mat3 r = random_rotation(rng, 15.0);
  const Vec3 t(detail::uniform(rng, -20.0, 20.0), detail::uniform(rng, -20.0, 20.0),
               detail::uniform(rng, -20.0, 20.0));
  return {r, t, FrameId::P, FrameId::OR};
}

CalibrationResult perturbed_calibration(const RigidTransform& truth, const NoiseModel& err,
                                        double scale, Rng& rng) {
  const Vec3 zr = detail::gaussian3(rng);
  const Vec3 zt = detail::gaussian3(rng);
  CalibrationResult c;
  const Mat3 r = exp_so3(deg2rad(scale * err.rot_sigma_deg) * zr) * truth.rotation();
  c.x = RigidTransform(orthonormalize(r), truth.translation() + scale * err.trans_sigma_mm * zt,
                       FrameId::H, FrameId::X);
  return c;
}

// Source placed `distance` from `target` along `dir` (OR frame), looking back.
RigidTransform view_from(const Vec3& target, const Vec3& dir, double distance) {
  const Vec3 d = dir.normalized();
  const Vec3 up = std::abs(d.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  return look_at(target + distance * d, target, up);
}

SessionConfig session_config(const ExperimentConfig& c, double scale, int repeat) {
  SessionConfig s;
  s.localizer = c.localizer.scaled(scale);
  s.localizer.seed = c.localizer.seed;
  s.pixel_noise_sigma = scale * c.pixel_noise_sigma;
  s.intrinsics = c.intrinsics;
  s.seed = repeat_seed(c.seed, repeat);
  return s;
}

std::string session_id(const std::string& name, std::size_t scale_index, int repeat) {
  return name + "-s" + std::to_string(scale_index) + "-r" + std::to_string(repeat);
}

bool is_planning_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParallelRays:
    case ErrorCode::CoplanarViews:
    case ErrorCode::NoCrossing:
    case ErrorCode::CollinearLandmarks:
    case ErrorCode::DegenerateProjection:
    case ErrorCode::NotFound:
      return true;
    default:
      return false;
  }
}

void summarize(ExperimentReport& report, const std::vector<double>& scales) {
  for (double scale : scales) {
    ExperimentSummary s;
    s.noise_scale = scale;
    for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
      std::vector<double> v;
      for (const auto& row : report.rows) {
        if (row.noise_scale == scale) v.push_back(row.metrics[m]);
      }
      s.metrics.push_back(mean_sd(v));
    }
    for (const auto& row : report.rows) {
      if (row.noise_scale == scale) s.redraws += row.redraws;
    }
    report.summary.push_back(s);
  }
}

struct Attempt {
  Session session;
  std::vector<double> metrics;
};

template <typename RunOnce>
ExperimentReport run(const std::string& name, std::vector<std::string> metric_names,
                     const ExperimentConfig& config, RunOnce&& once) {
  config.validate();
  ExperimentReport report;
  report.name = name;
  report.metric_names = std::move(metric_names);
  for (std::size_t si = 0; si < config.noise_scales.size(); ++si) {
    const double scale = config.noise_scales[si];
    for (int r = 0; r < config.repeats; ++r) {
      Rng scene = repeat_rng(config.seed, r, 1);
      Rng noise = repeat_rng(config.seed, r, 2);
      int redraws = 0;
      for (;;) {
        try {
          Attempt a = once(session_id(name, si, r), scale, r, scene, noise);
          ExperimentRow row;
          row.noise_scale = scale;
          row.repeat = r;
          row.shots = static_cast<int>(a.session.shots.size());
          row.dose = a.session.dose();
          row.redraws = redraws;
          row.metrics = std::move(a.metrics);
          report.rows.push_back(std::move(row));
          if (config.keep_sessions) report.sessions.push_back(std::move(a.session));
          break;
        } catch (const Error& e) {
          if (!is_planning_error(e.code()) || redraws >= config.max_redraws) throw;
          ++redraws;
        }
      }
    }
  }
  summarize(report, config.noise_scales);
  return report;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (noise_scales.empty()) throw Error(ErrorCode::InvalidParams, "no noise scales");
  for (double s : noise_scales) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorCode::InvalidParams, "noise scales must be finite and >= 0");
    }
  }
  if (repeats < 1) throw Error(ErrorCode::InvalidParams, "repeats must be >= 1");
  localizer.validate();
  calibration_error.validate();
  intrinsics.validate();
  if (!(pixel_noise_sigma >= 0.0) || !(tremor_deg >= 0.0) || !(tremor_mm >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "noise levels must be >= 0");
  }
  if (!(source_distance > 0.0)) throw Error(ErrorCode::InvalidParams, "source distance must be > 0");
  if (max_redraws < 0) throw Error(ErrorCode::InvalidParams, "max_redraws must be >= 0");
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out << "experiment,noise_scale,repeat,shots,dose,redraws";
  for (const auto& m : metric_names) out << ',' << m;
  out << '\n';
  char buf[32];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return std::string(buf);
  };
  for (const auto& row : rows) {
    out << name << ',' << num(row.noise_scale) << ',' << row.repeat << ',' << row.shots << ','
        << num(row.dose) << ',' << row.redraws;
    for (double v : row.metrics) out << ',' << num(v);
    out << '\n';
  }
  return out.str();
}

const ExperimentSummary& ExperimentReport::at_scale(double noise_scale) const {
  for (const auto& s : summary) {
    if (s.noise_scale == noise_scale) return s;
  }
  throw Error(ErrorCode::NotFound, "no summary at this noise scale");
}

int ExperimentReport::metric(std::string_view metric_name) const {
  for (std::size_t i = 0; i < metric_names.size(); ++i) {
    if (metric_names[i] == metric_name) return static_cast<int>(i);
  }
  throw Error(ErrorCode::NotFound, "no metric '" + std::string(metric_name) + "'");
}

ExperimentReport run_kwire_experiment(const ExperimentConfig& config) {
  const RigidTransform truth_x = default_hand_eye();
  return run(
      "kwire",
      {"entry_dist_mm", "exit_dist_mm", "mean_error_mm", "breached", "planned_mean_error_mm",
       "plan_residual_mm"},
      config, [&](const std::string& id, double scale, int repeat, Rng& scene, Rng& noise) {
        PhantomParams params;
        params.pose = jittered_phantom_pose(scene);
        Phantom phantom = build_phantom(PhantomKind::TubeInCube, params);
        const CalibrationResult cal =
            perturbed_calibration(truth_x, config.calibration_error, scale, noise);
        Session s = open_session(id, phantom, session_config(config, scale, repeat), truth_x, cal);

        // two roughly orthogonal views of the tube midpoint
        const TubePhantomSpec tube = s.phantom.tube_or();
        const Vec3 mid = 0.5 * (tube.axis_start + tube.axis_end);
        const Mat3 rp = s.phantom.pose.rotation();
        for (const Vec3& axis : {Vec3(0.0, 1.0, 0.0), Vec3(0.0, 0.0, 1.0)}) {
          const Vec3 dir = random_rotation(scene, 10.0) * (rp * axis);
          acquire(s, view_from(mid, dir, config.source_distance));
        }

        std::array<int, 4> ids{};
        for (int k = 0; k < 2; ++k) {
          const SyntheticShot& shot = s.shots[static_cast<std::size_t>(k)];
          const auto& entry = shot.landmark("tube_entry");
          const auto& exit = shot.landmark("tube_exit");
          if (!entry.visible || !exit.visible) {
            throw Error(ErrorCode::NotFound, "tube end not visible");
          }
          ids[static_cast<std::size_t>(2 * k)] =
              annotate(s, {k, entry.pixel, AnnotationLabel::Entry, -1, "scripted", 0});
          ids[static_cast<std::size_t>(2 * k + 1)] =
              annotate(s, {k, exit.pixel, AnnotationLabel::Exit, -1, "scripted", 0});
        }
        const TrajectoryPlan& plan = plan_trajectory(s, ids);
        const Trajectory3D planned = plan.trajectory;

        Trajectory3D placed = planned;
        placed.direction = gaussian_rotation(noise, scale * config.tremor_deg) * planned.direction;
        placed.point += scale * config.tremor_mm * detail::gaussian3(noise);
        const Execution& e = execute(s, ToolKind::KWire, placed);
        const KWireError planned_err = kwire_error(planned, tube);
        std::vector<double> m{e.kwire->entry_dist, e.kwire->exit_dist,     e.kwire->mean,
                              e.kwire->breached ? 1.0 : 0.0, planned_err.mean, planned.residual};
        return Attempt{std::move(s), std::move(m)};
      });
}

ExperimentReport run_tha_experiment(const ExperimentConfig& config) {
  const RigidTransform truth_x = default_hand_eye();
  static const char* const kTargets[] = {"asis_left", "asis_right", "pubis", "acetabulum"};
  return run(
      "tha",
      {"abduction_deg", "anteversion_deg", "abduction_error_deg", "anteversion_error_deg",
       "in_safe_zone", "cup_centre_error_mm"},
      config, [&](const std::string& id, double scale, int repeat, Rng& scene, Rng& noise) {
        PhantomParams params;
        params.pose = jittered_phantom_pose(scene);
        Phantom phantom = build_phantom(PhantomKind::PelvisLandmarks, params);
        const CalibrationResult cal =
            perturbed_calibration(truth_x, config.calibration_error, scale, noise);
        Session s = open_session(id, phantom, session_config(config, scale, repeat), truth_x, cal);

        // two oblique anterior views per landmark, +-30 degrees about the
        // longitudinal axis
        const Mat3 rp = s.phantom.pose.rotation();
        for (const char* name : kTargets) {
          const Vec3 target = s.phantom.landmark_or(name);
          for (double yaw : {-30.0, 30.0}) {
            const Vec3 dir = random_rotation(scene, 5.0) * (rp * (rot_z_deg(yaw) * Vec3::UnitY()));
            acquire(s, view_from(target, dir, config.source_distance));
          }
        }

        std::vector<Vec3> points;
        for (int l = 0; l < 4; ++l) {
          const int lm = s.phantom.landmark_index(kTargets[l]);
          std::vector<int> ids;
          for (int k = 2 * l; k < 2 * l + 2; ++k) {
            const auto& obs = s.shots[static_cast<std::size_t>(k)].landmark(kTargets[l]);
            if (!obs.visible) throw Error(ErrorCode::NotFound, "landmark not visible");
            ids.push_back(annotate(s, {k, obs.pixel, AnnotationLabel::Landmark, lm, "scripted", 0}));
          }
          points.push_back(plan_landmark(s, ids).point);
        }

        const APPFrame app = app_from_landmarks(points[0], points[1], points[2]);
        const Vec3 target_axis = cup_axis_from_angles(kTargetCup, app);
        Trajectory3D placed;
        placed.point = points[3];
        placed.direction = gaussian_rotation(noise, scale * config.tremor_deg) * target_axis;
        const Execution& e = execute(s, ToolKind::ImpactorCup, placed);
        const CupOrientation c = *e.cup;
        std::vector<double> m{c.abduction_deg,
                              c.anteversion_deg,
                              std::abs(c.abduction_deg - kTargetCup.abduction_deg),
                              std::abs(c.anteversion_deg - kTargetCup.anteversion_deg),
                              in_safe_zone(c) ? 1.0 : 0.0,
                              (points[3] - s.phantom.landmark_or("acetabulum")).norm()};
        return Attempt{std::move(s), std::move(m)};
      });
}

}  // namespace frustum
