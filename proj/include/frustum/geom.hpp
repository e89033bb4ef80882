#pragma once

// Frames, rigid transforms, unit quaternions and the pinhole/transmission
// projection shared by every other part of the library.
//
// X-ray frame convention: origin at the source, +z along the source to
// detector axis, detector plane at z = f. Lengths are millimetres. Angles are
// degrees wherever a function name ends in _deg and radians otherwise.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <string_view>

namespace frustum {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

enum class FrameId {
  OR,    // operating room anchor
  X,     // X-ray source
  H,     // visual tracker on the gantry
  IR,    // external infrared tracker
  S,     // surgeon headset
  I,     // interactive image
  D,     // detector
  P,     // phantom
  Tool,  // virtual tool model
};

std::string_view frame_name(FrameId id) noexcept;
// Throws Error(InvalidParams) for unknown names.
FrameId parse_frame(std::string_view name);

Mat3 skew(const Vec3& v);
Mat3 rot_x_deg(double deg);
Mat3 rot_y_deg(double deg);
Mat3 rot_z_deg(double deg);
Mat3 exp_so3(const Vec3& rotvec);
Vec3 log_so3(const Mat3& r);
// Angle of a rotation in [0, pi], accurate for small angles.
double rotation_angle(const Mat3& r);
inline double rotation_angle_deg(const Mat3& r) { return rad2deg(rotation_angle(r)); }
// Nearest rotation in the Frobenius sense.
Mat3 orthonormalize(const Mat3& m);
bool is_rotation(const Mat3& r, double tol = 1e-9);

// Unit quaternion q = s + v, canonicalized so that s >= 0 (q and -q are the
// same rotation).
class UnitQuaternion {
 public:
  UnitQuaternion() = default;
  // Normalizes and canonicalizes; throws InvalidParams for a zero quaternion.
  UnitQuaternion(double s, const Vec3& v);

  static UnitQuaternion identity() { return {}; }
  static UnitQuaternion from_rotation(const Mat3& r);
  static UnitQuaternion from_axis_angle_deg(const Vec3& axis, double deg);

  double s() const { return s_; }
  const Vec3& v() const { return v_; }
  Vec4 coeffs() const { return {s_, v_.x(), v_.y(), v_.z()}; }

  Mat3 rotation() const;
  UnitQuaternion conjugate() const { return {s_, -v_}; }
  double angle() const;

  friend UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b);

 private:
  double s_ = 1.0;
  Vec3 v_ = Vec3::Zero();
};

// SE(3) pose mapping points expressed in `from` into `to`.
class RigidTransform {
 public:
  RigidTransform() = default;
  // Throws InvalidParams unless rotation is orthonormal with det +1 (1e-9).
  RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from, FrameId to);

  static RigidTransform identity(FrameId from = FrameId::OR, FrameId to = FrameId::OR);
  static RigidTransform from_quaternion(const UnitQuaternion& q, const Vec3& t, FrameId from,
                                        FrameId to);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  FrameId from() const { return from_; }
  FrameId to() const { return to_; }

  UnitQuaternion quaternion() const { return UnitQuaternion::from_rotation(rotation_); }
  Mat4 matrix() const;
  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform with_frames(FrameId from, FrameId to) const;

  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  FrameId from_ = FrameId::OR;
  FrameId to_ = FrameId::OR;
};

// a after b. Requires a.from() == b.to(), else FrameMismatch.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

// Pose of an X-ray source at `source` looking at `target` (^OR T_X).
RigidTransform look_at(const Vec3& source, const Vec3& target, const Vec3& up);

struct CameraIntrinsics {
  double focal_length = 1000.0;  // source to detector distance, mm
  double pixel_pitch = 0.3;      // mm per pixel
  Vec2 principal_point{512.0, 512.0};
  Vec2 image_size{1024.0, 1024.0};

  // Throws InvalidParams when an invariant is violated.
  void validate() const;
  double focal_px() const { return focal_length / pixel_pitch; }
  Mat3 matrix() const;
  bool in_bounds(const Vec2& px) const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length

  // Normalizes the direction; throws InvalidParams for a zero direction.
  static Ray make(const Vec3& origin, const Vec3& direction);
  Vec3 at(double t) const { return origin + t * direction; }
  double distance_to(const Vec3& p) const;
};

// Perspective projection of an OR-frame point through ^X T_OR. Returns
// nullopt when the point is not in front of the source.
std::optional<Vec2> try_project(const CameraIntrinsics& k, const RigidTransform& or_to_x,
                                const Vec3& x);
// As try_project but throws BehindSource. Checks the pose maps OR -> X.
Vec2 project(const CameraIntrinsics& k, const RigidTransform& or_to_x, const Vec3& x);

}  // namespace frustum
