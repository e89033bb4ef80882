#pragma once

// Clinical reference frames and outcome metrics: anterior pelvic plane (APP),
// acetabular cup abduction/anteversion, the safe zone, and K-wire placement
// error inside a tubular corridor.

#include "frustum/geom.hpp"
#include "frustum/planning.hpp"

namespace frustum {

struct APPFrame {
  Vec3 origin = Vec3::Zero();  // midpoint of the ASIS landmarks
  Vec3 lateral = Vec3::UnitX();
  Vec3 anterior = Vec3::UnitY();
  Vec3 longitudinal = Vec3::UnitZ();
};

struct CupOrientation {
  double abduction_deg = 0.0;
  double anteversion_deg = 0.0;
  friend bool operator==(const CupOrientation&, const CupOrientation&) = default;
};

// Radiographic: anteversion is the angle between the cup axis and the APP,
// abduction the in-plane angle from the longitudinal axis. Operative:
// inclination is the angle to the sagittal plane, anteversion the angle from
// the longitudinal axis within the sagittal plane.
enum class AngleConvention { Radiographic, Operative };

struct TubePhantomSpec {
  Vec3 axis_start = Vec3::Zero();
  Vec3 axis_end = Vec3::UnitX();
  double diameter = 10.0;

  void validate() const;
  friend bool operator==(const TubePhantomSpec&, const TubePhantomSpec&) = default;
};

struct SafeZone {
  double abduction_min = 30.0;
  double abduction_max = 50.0;
  double anteversion_min = 5.0;
  double anteversion_max = 25.0;
};

inline constexpr CupOrientation kTargetCup{40.0, 15.0};

// Throws CollinearLandmarks when the triangle area is <= 1 mm^2.
APPFrame app_from_landmarks(const Vec3& asis_left, const Vec3& asis_right, const Vec3& pubis);

// Throws DegenerateProjection when the axis is perpendicular to the APP.
CupOrientation cup_angles(const Vec3& cup_axis, const APPFrame& app,
                          AngleConvention convention = AngleConvention::Radiographic);

// Unit cup axis with the given radiographic angles (inverse of cup_angles).
Vec3 cup_axis_from_angles(const CupOrientation& cup, const APPFrame& app);

bool in_safe_zone(const CupOrientation& cup, const SafeZone& zone = {});

struct KWireError {
  double entry_dist = 0.0;
  double exit_dist = 0.0;
  double mean = 0.0;
  bool breached = false;
  friend bool operator==(const KWireError&, const KWireError&) = default;
};

// Distances from the wire to the tube centre on the two end planes. Throws
// NoCrossing when the wire is more than 89 degrees off the tube axis.
KWireError kwire_error(const Trajectory3D& wire, const TubePhantomSpec& tube,
                       double wire_radius = VirtualTool::kKWireDiameter / 2.0);

}  // namespace frustum
