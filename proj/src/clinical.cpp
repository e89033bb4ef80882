#include "frustum/clinical.hpp"

#include "frustum/error.hpp"

#include <cmath>

namespace frustum {

void TubePhantomSpec::validate() const {
  if (!(diameter > 0.0)) throw Error(ErrorCode::InvalidParams, "tube diameter must be > 0");
  if (!((axis_end - axis_start).norm() > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "tube axis has zero length");
  }
}

APPFrame app_from_landmarks(const Vec3& asis_left, const Vec3& asis_right, const Vec3& pubis) {
  const double area = 0.5 * (asis_right - asis_left).cross(pubis - asis_left).norm();
  if (!(area > 1.0)) throw Error(ErrorCode::CollinearLandmarks, "APP landmarks are collinear");

  APPFrame app;
  app.origin = 0.5 * (asis_left + asis_right);
  app.lateral = (asis_right - asis_left).normalized();
  const Vec3 up = app.origin - pubis;
  app.longitudinal = (up - up.dot(app.lateral) * app.lateral).normalized();
  app.anterior = app.longitudinal.cross(app.lateral);
  return app;
}

CupOrientation cup_angles(const Vec3& cup_axis, const APPFrame& app, AngleConvention convention) {
  const double norm = cup_axis.norm();
  if (std::abs(norm - 1.0) > 1e-9) throw Error(ErrorCode::InvalidParams, "cup axis must be unit");
  // The axis is a line; pick the sign pointing lateral/longitudinal so that
  // abduction 0 (x == 0 up to rounding) does not flip to 180.
  Vec3 axis = cup_axis;
  if (axis.dot(app.lateral + app.longitudinal) < 0.0) axis = -axis;

  const double x = axis.dot(app.lateral);
  const double y = axis.dot(app.anterior);
  const double z = axis.dot(app.longitudinal);
  if (std::abs(y) > 1.0 - 1e-9) {
    throw Error(ErrorCode::DegenerateProjection, "cup axis is perpendicular to the APP");
  }

  CupOrientation out;
  if (convention == AngleConvention::Radiographic) {
    out.anteversion_deg = rad2deg(std::atan2(y, std::hypot(x, z)));
    out.abduction_deg = rad2deg(std::atan2(x, z));
  } else {
    out.abduction_deg = rad2deg(std::atan2(x, std::hypot(y, z)));
    out.anteversion_deg = rad2deg(std::atan2(y, z));
  }
  return out;
}

Vec3 cup_axis_from_angles(const CupOrientation& cup, const APPFrame& app) {
  const double abd = deg2rad(cup.abduction_deg);
  const double ant = deg2rad(cup.anteversion_deg);
  return (std::sin(abd) * std::cos(ant)) * app.lateral + std::sin(ant) * app.anterior +
         (std::cos(abd) * std::cos(ant)) * app.longitudinal;
}

bool in_safe_zone(const CupOrientation& cup, const SafeZone& zone) {
  return cup.abduction_deg >= zone.abduction_min && cup.abduction_deg <= zone.abduction_max &&
         cup.anteversion_deg >= zone.anteversion_min && cup.anteversion_deg <= zone.anteversion_max;
}

KWireError kwire_error(const Trajectory3D& wire, const TubePhantomSpec& tube, double wire_radius) {
  tube.validate();
  const Vec3 axis = (tube.axis_end - tube.axis_start).normalized();
  const Vec3 dir = wire.direction.normalized();
  const double c = dir.dot(axis);
  if (std::abs(c) <= std::cos(deg2rad(89.0))) {
    throw Error(ErrorCode::NoCrossing, "wire does not cross the tube end planes");
  }
  auto hit = [&](const Vec3& plane_point) {
    const double t = (plane_point - wire.point).dot(axis) / c;
    return Vec3(wire.point + t * dir);
  };
  KWireError out;
  out.entry_dist = (hit(tube.axis_start) - tube.axis_start).norm();
  out.exit_dist = (hit(tube.axis_end) - tube.axis_end).norm();
  out.mean = 0.5 * (out.entry_dist + out.exit_dist);
  const double limit = 0.5 * tube.diameter - wire_radius;
  out.breached = out.entry_dist > limit || out.exit_dist > limit;
  return out;
}

}  // namespace frustum
