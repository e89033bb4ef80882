#include "frustum/flying_frustum.hpp"

#include "frustum/error.hpp"
#include "sampling.hpp"

#include <algorithm>
#include <string>

namespace frustum {

namespace {

void check_near_plane(const FlyingFrustum& fr) {
  if (!(fr.near_plane >= 0.0 && fr.near_plane <= fr.intrinsics.focal_length)) {
    throw Error(ErrorCode::NearPlaneOutOfRange,
                "near plane " + std::to_string(fr.near_plane) + " outside [0, " +
                    std::to_string(fr.intrinsics.focal_length) + "]");
  }
}

}  // namespace

void FlyingFrustum::validate() const {
  intrinsics.validate();
  if (source_pose.from() != FrameId::X || source_pose.to() != FrameId::OR) {
    throw Error(ErrorCode::FrameMismatch, "frustum source pose must map X -> OR");
  }
  check_near_plane(*this);
}

RigidTransform image_pose(const FlyingFrustum& fr) {
  check_near_plane(fr);
  const Mat3& r = fr.source_pose.rotation();
  return {r, fr.source_pose.translation() + fr.near_plane * r.col(2), FrameId::I, FrameId::OR};
}

Vec2 scale_to_near_plane(const Vec2& px, const FlyingFrustum& fr) {
  check_near_plane(fr);
  const Vec2& c = fr.intrinsics.principal_point;
  return c + fr.scale() * (px - c);
}

std::optional<Vec2> try_frustum_project(const FlyingFrustum& fr, const Vec3& x) {
  check_near_plane(fr);
  auto px = try_project(fr.intrinsics, fr.or_to_source(), x);
  if (!px) return std::nullopt;
  return scale_to_near_plane(*px, fr);
}

Vec2 frustum_project(const FlyingFrustum& fr, const Vec3& x) {
  auto px = try_frustum_project(fr, x);
  if (!px) throw Error(ErrorCode::BehindSource, "point is behind the X-ray source");
  return *px;
}

Mat34 frustum_projection_matrix(const FlyingFrustum& fr) {
  check_near_plane(fr);
  const double s = fr.scale();
  const Vec2& c = fr.intrinsics.principal_point;
  Mat3 scaling = Mat3::Identity();
  scaling(0, 0) = s;
  scaling(1, 1) = s;
  scaling(0, 2) = (1.0 - s) * c.x();
  scaling(1, 2) = (1.0 - s) * c.y();
  const RigidTransform w = fr.or_to_source();
  Mat34 extrinsic;
  extrinsic.leftCols<3>() = w.rotation();
  extrinsic.col(3) = w.translation();
  return scaling * fr.intrinsics.matrix() * extrinsic;
}

bool contains(const FlyingFrustum& fr, const Vec3& x) {
  auto px = try_project(fr.intrinsics, fr.or_to_source(), x);
  return px && fr.intrinsics.in_bounds(*px);
}

FrustumAlignment alignment_to(const FlyingFrustum& current, const FlyingFrustum& target) {
  const RigidTransform delta = compose(invert(target.source_pose), current.source_pose);
  FrustumAlignment out;
  const Vec3 w = log_so3(delta.rotation());
  out.rot_offset_deg = rotation_angle_deg(delta.rotation());
  out.trans_offset_mm = delta.translation().norm();
  if (w.norm() > 0.0) out.axis_hint = w.normalized();
  return out;
}

CoverageReport interlock(std::span<const FlyingFrustum> frustums, const Box& extent, int samples,
                         std::uint64_t seed) {
  if (frustums.empty()) throw Error(ErrorCode::InvalidParams, "interlock needs >= 1 frustum");
  if (samples < 100000) throw Error(ErrorCode::InvalidParams, "interlock needs >= 1e5 samples");
  if ((extent.max - extent.min).minCoeff() < 0.0) {
    throw Error(ErrorCode::InvalidParams, "box max must not be below min");
  }
  const std::size_t m = frustums.size();
  std::vector<long> inside(m, 0);
  std::vector<std::vector<long>> both(m, std::vector<long>(m, 0));
  long any = 0;

  detail::Rng rng(seed);
  std::vector<char> hit(m);
  for (int k = 0; k < samples; ++k) {
    const double ux = detail::uniform(rng, 0.0, 1.0);
    const double uy = detail::uniform(rng, 0.0, 1.0);
    const double uz = detail::uniform(rng, 0.0, 1.0);
    const Vec3 p = extent.min + Vec3(ux, uy, uz).cwiseProduct(extent.max - extent.min);
    bool in_any = false;
    for (std::size_t i = 0; i < m; ++i) {
      hit[i] = contains(frustums[i], p) ? 1 : 0;
      in_any = in_any || hit[i];
      inside[i] += hit[i];
    }
    any += in_any ? 1 : 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!hit[i]) continue;
      for (std::size_t j = 0; j < m; ++j) both[i][j] += hit[j];
    }
  }

  const double total = static_cast<double>(samples);
  CoverageReport out;
  out.samples = samples;
  out.coverage = static_cast<double>(any) / total;
  out.per_frustum.resize(m);
  out.overlap.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    out.per_frustum[i] = static_cast<double>(inside[i]) / total;
    for (std::size_t j = 0; j < m; ++j) out.overlap[i][j] = static_cast<double>(both[i][j]) / total;
  }
  return out;
}

}  // namespace frustum
