#include "frustum/geom.hpp"

#include "frustum/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace frustum {

namespace {

constexpr std::string_view kFrameNames[] = {"OR", "X", "H", "IR", "S", "I", "D", "P", "Tool"};

Vec3 vee(const Mat3& m) { return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)}; }

}  // namespace

std::string_view frame_name(FrameId id) noexcept { return kFrameNames[static_cast<int>(id)]; }

FrameId parse_frame(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::size(kFrameNames)); ++i) {
    if (kFrameNames[i] == name) return static_cast<FrameId>(i);
  }
  throw Error(ErrorCode::InvalidParams, "unknown frame '" + std::string(name) + "'");
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Mat3 rot_x_deg(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y_deg(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z_deg(double deg) { return Eigen::AngleAxisd(deg2rad(deg), Vec3::UnitZ()).toRotationMatrix(); }

Mat3 exp_so3(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  if (theta == 0.0) return Mat3::Identity();
  if (theta < 1e-12) return orthonormalize(Mat3::Identity() + skew(rotvec));
  return Eigen::AngleAxisd(theta, rotvec / theta).toRotationMatrix();
}

Vec3 log_so3(const Mat3& r) {
  Eigen::Quaterniond q(r);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double vn = q.vec().norm();
  if (vn < 1e-300) return Vec3::Zero();
  const double theta = 2.0 * std::atan2(vn, q.w());
  return theta * q.vec() / vn;
}

double rotation_angle(const Mat3& r) {
  const double sin_theta = 0.5 * vee(r).norm();
  const double cos_theta = 0.5 * (r.trace() - 1.0);
  return std::atan2(sin_theta, cos_theta);
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

// --- UnitQuaternion ---------------------------------------------------------

UnitQuaternion::UnitQuaternion(double s, const Vec3& v) {
  const double n = std::sqrt(s * s + v.squaredNorm());
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidParams, "zero quaternion");
  s_ = s / n;
  v_ = v / n;
  bool flip = s_ < 0.0;
  if (s_ == 0.0) {
    // tie-break on the first non-zero vector component
    for (int i = 0; i < 3; ++i) {
      if (v_[i] != 0.0) {
        flip = v_[i] < 0.0;
        break;
      }
    }
  }
  if (flip) {
    s_ = -s_;
    v_ = -v_;
  }
}

UnitQuaternion UnitQuaternion::from_rotation(const Mat3& r) {
  const Eigen::Quaterniond q(r);
  return {q.w(), q.vec()};
}

UnitQuaternion UnitQuaternion::from_axis_angle_deg(const Vec3& axis, double deg) {
  const double half = 0.5 * deg2rad(deg);
  return {std::cos(half), std::sin(half) * axis.normalized()};
}

Mat3 UnitQuaternion::rotation() const {
  return Eigen::Quaterniond(s_, v_.x(), v_.y(), v_.z()).toRotationMatrix();
}

double UnitQuaternion::angle() const { return 2.0 * std::atan2(v_.norm(), s_); }

UnitQuaternion operator*(const UnitQuaternion& a, const UnitQuaternion& b) {
  return {a.s_ * b.s_ - a.v_.dot(b.v_), a.s_ * b.v_ + b.s_ * a.v_ + a.v_.cross(b.v_)};
}

// --- RigidTransform ---------------------------------------------------------

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from,
                               FrameId to)
    : rotation_(rotation), translation_(translation), from_(from), to_(to) {
  if (!is_rotation(rotation_)) {
    throw Error(ErrorCode::InvalidParams, "rotation is not orthonormal with det +1");
  }
  if (!translation_.allFinite()) throw Error(ErrorCode::InvalidParams, "non-finite translation");
}

RigidTransform RigidTransform::identity(FrameId from, FrameId to) {
  return {Mat3::Identity(), Vec3::Zero(), from, to};
}

RigidTransform RigidTransform::from_quaternion(const UnitQuaternion& q, const Vec3& t,
                                               FrameId from, FrameId to) {
  return {q.rotation(), t, from, to};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::with_frames(FrameId from, FrameId to) const {
  RigidTransform out = *this;
  out.from_ = from;
  out.to_ = to;
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (a.from() != b.to()) {
    throw Error(ErrorCode::FrameMismatch,
                "cannot compose " + std::string(frame_name(a.from())) + "->" +
                    std::string(frame_name(a.to())) + " after " +
                    std::string(frame_name(b.from())) + "->" + std::string(frame_name(b.to())));
  }
  Mat3 r = a.rotation() * b.rotation();
  // keep long chains on SO(3); exact products are left untouched
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-13) r = orthonormalize(r);
  return {r, a.rotation() * b.translation() + a.translation(), b.from(), a.to()};
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation().transpose();
  return {rt, -(rt * t.translation()), t.to(), t.from()};
}

RigidTransform look_at(const Vec3& source, const Vec3& target, const Vec3& up) {
  const Vec3 d = target - source;
  if (d.norm() < 1e-9) throw Error(ErrorCode::InvalidParams, "look_at source equals target");
  const Vec3 z = d.normalized();
  Vec3 x = up.cross(z);
  if (x.norm() < 1e-9) x = (std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(z);
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, source, FrameId::X, FrameId::OR};
}

// --- CameraIntrinsics / Ray -------------------------------------------------

void CameraIntrinsics::validate() const {
  if (!(focal_length > 0.0)) throw Error(ErrorCode::InvalidParams, "focal length must be > 0");
  if (!(pixel_pitch > 0.0)) throw Error(ErrorCode::InvalidParams, "pixel pitch must be > 0");
  if (!(image_size.x() > 0.0 && image_size.y() > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "image size must be positive");
  }
  if (!in_bounds(principal_point)) {
    throw Error(ErrorCode::InvalidParams, "principal point outside the image");
  }
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = focal_px();
  k(1, 1) = focal_px();
  k(0, 2) = principal_point.x();
  k(1, 2) = principal_point.y();
  return k;
}

bool CameraIntrinsics::in_bounds(const Vec2& px) const {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= image_size.x() && px.y() <= image_size.y();
}

Ray Ray::make(const Vec3& origin, const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::InvalidParams, "ray direction is zero");
  return {origin, direction / n};
}

double Ray::distance_to(const Vec3& p) const {
  const Vec3 d = p - origin;
  return (d - d.dot(direction) * direction).norm();
}

std::optional<Vec2> try_project(const CameraIntrinsics& k, const RigidTransform& or_to_x,
                                const Vec3& x) {
  if (or_to_x.from() != FrameId::OR || or_to_x.to() != FrameId::X) {
    throw Error(ErrorCode::FrameMismatch, "projection pose must map OR -> X");
  }
  const Vec3 p = or_to_x.apply(x);
  if (!(p.z() > 0.0)) return std::nullopt;
  const double fpx = k.focal_px();
  return Vec2{fpx * p.x() / p.z() + k.principal_point.x(),
              fpx * p.y() / p.z() + k.principal_point.y()};
}

Vec2 project(const CameraIntrinsics& k, const RigidTransform& or_to_x, const Vec3& x) {
  auto px = try_project(k, or_to_x, x);
  if (!px) throw Error(ErrorCode::BehindSource, "point is behind the X-ray source");
  return *px;
}

}  // namespace frustum
