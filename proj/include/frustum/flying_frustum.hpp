#pragma once

// The flying frustum: the full viewing pyramid of one X-ray acquisition, with
// the image placed on an adjustable near plane at distance n from the source
// (0 <= n <= f, n = f being the detector).

#include "frustum/geom.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace frustum {

struct ImageRef {
  std::string path;               // PNG or raw 8-bit grayscale file, may be empty
  std::int64_t timestamp_ms = 0;  // simulator clock

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct FlyingFrustum {
  CameraIntrinsics intrinsics;
  RigidTransform source_pose = RigidTransform::identity(FrameId::X, FrameId::OR);  // ^OR T_X
  ImageRef image;
  double near_plane = 1000.0;  // n, mm

  // Throws NearPlaneOutOfRange / InvalidParams / FrameMismatch.
  void validate() const;
  double scale() const { return near_plane / intrinsics.focal_length; }
  RigidTransform or_to_source() const { return invert(source_pose); }
  Vec3 source_position() const { return source_pose.translation(); }
  Vec3 viewing_axis() const { return source_pose.rotation().col(2); }

  friend bool operator==(const FlyingFrustum&, const FlyingFrustum&) = default;
};

struct FrustumAlignment {
  double rot_offset_deg = 0.0;
  double trans_offset_mm = 0.0;
  Vec3 axis_hint = Vec3::UnitZ();  // rotation axis in the target source frame
};

// ^OR T_I: the source pose offset by n along its viewing axis.
RigidTransform image_pose(const FlyingFrustum& fr);

// Scales an acquisition pixel about the principal point by n / f. Bounds of
// `px` are not checked here.
Vec2 scale_to_near_plane(const Vec2& px, const FlyingFrustum& fr);

std::optional<Vec2> try_frustum_project(const FlyingFrustum& fr, const Vec3& x);
// Near-plane pixel of an OR-frame point. Throws BehindSource.
Vec2 frustum_project(const FlyingFrustum& fr, const Vec3& x);

// 3x4 near-plane projection matrix acting on homogeneous OR points.
Mat34 frustum_projection_matrix(const FlyingFrustum& fr);

// True when x lies inside the (semi-infinite) viewing pyramid.
bool contains(const FlyingFrustum& fr, const Vec3& x);

// Repositioning that takes `current` onto `target`.
FrustumAlignment alignment_to(const FlyingFrustum& current, const FlyingFrustum& target);

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct CoverageReport {
  double coverage = 0.0;                     // fraction of the box inside >= 1 pyramid
  std::vector<double> per_frustum;           // fraction inside each pyramid
  std::vector<std::vector<double>> overlap;  // fraction inside both i and j
  int samples = 0;
};

// Seeded Monte-Carlo coverage of `extent` by the frustums (>= 1e5 samples).
CoverageReport interlock(std::span<const FlyingFrustum> frustums, const Box& extent,
                         int samples = 100000, std::uint64_t seed = 0x5eedULL);

}  // namespace frustum
