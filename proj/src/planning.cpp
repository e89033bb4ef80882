#include "frustum/planning.hpp"

#include "frustum/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace frustum {

namespace {

constexpr double kMinRayAngleDeg = 0.1;
constexpr double kMinPlaneAngleDeg = 0.1;
constexpr int kAxisSamples = 11;

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace

std::string_view label_name(AnnotationLabel label) noexcept {
  switch (label) {
    case AnnotationLabel::Landmark: return "landmark";
    case AnnotationLabel::Entry: return "entry";
    case AnnotationLabel::Exit: return "exit";
  }
  return "landmark";
}

AnnotationLabel parse_label(std::string_view name) {
  if (name == "landmark") return AnnotationLabel::Landmark;
  if (name == "entry") return AnnotationLabel::Entry;
  if (name == "exit") return AnnotationLabel::Exit;
  throw Error(ErrorCode::InvalidParams, "unknown annotation label '" + std::string(name) + "'");
}

std::string_view tool_kind_name(ToolKind kind) noexcept {
  switch (kind) {
    case ToolKind::KWire: return "kwire";
    case ToolKind::Drill: return "drill";
    case ToolKind::ImpactorCup: return "impactor_cup";
  }
  return "kwire";
}

ToolKind parse_tool_kind(std::string_view name) {
  if (name == "kwire") return ToolKind::KWire;
  if (name == "drill") return ToolKind::Drill;
  if (name == "impactor_cup") return ToolKind::ImpactorCup;
  throw Error(ErrorCode::InvalidParams, "unknown tool kind '" + std::string(name) + "'");
}

VirtualTool VirtualTool::make(ToolKind kind, const RigidTransform& pose) {
  VirtualTool tool;
  tool.kind = kind;
  tool.pose = pose;
  switch (kind) {
    case ToolKind::KWire:
      tool.model_points = {{0, 0, 0}, {0, 0, 150}};
      for (int i = 1; i < 6; ++i) tool.model_points.emplace_back(0, 0, 25.0 * i);
      break;
    case ToolKind::Drill:
      tool.model_points = {{0, 0, 0}, {0, 0, 120}};
      for (double x : {-30.0, 30.0}) {
        for (double y : {-30.0, 30.0}) tool.model_points.emplace_back(x, y, 200.0);
      }
      break;
    case ToolKind::ImpactorCup:
      // cup centre at the origin, impactor handle along the cup axis
      tool.model_points = {{0, 0, 0}, {0, 0, 250}};
      for (int i = 0; i < 8; ++i) {
        const double a = 2.0 * kPi * i / 8.0;
        tool.model_points.emplace_back(27.0 * std::cos(a), 27.0 * std::sin(a), 0.0);
      }
      break;
  }
  tool.validate();
  return tool;
}

void VirtualTool::validate() const {
  if (model_points.size() < 2) throw Error(ErrorCode::InvalidParams, "tool needs >= 2 points");
  if ((model_points[1] - model_points[0]).norm() <= 0.0) {
    throw Error(ErrorCode::InvalidParams, "tool axis has zero length");
  }
  if (pose.from() != FrameId::Tool || pose.to() != FrameId::OR) {
    throw Error(ErrorCode::FrameMismatch, "tool pose must map Tool -> OR");
  }
}

Ray ray_from_annotation(const FlyingFrustum& fr, const Annotation& ann) {
  if (!fr.intrinsics.in_bounds(ann.point)) {
    throw Error(ErrorCode::InvalidParams, "annotation outside the image");
  }
  // K^-1 applied to the homogeneous pixel
  const Vec2 offset = ann.point - fr.intrinsics.principal_point;
  const Vec3 local(offset.x() / fr.intrinsics.focal_px(), offset.y() / fr.intrinsics.focal_px(), 1.0);
  return Ray::make(fr.source_position(), fr.source_pose.rotation() * local);
}

Triangulation triangulate(std::span<const Ray> rays) {
  if (rays.size() < 2) throw Error(ErrorCode::InsufficientData, "triangulation needs >= 2 rays");
  const double min_sin = std::sin(deg2rad(kMinRayAngleDeg));
  bool spread = false;
  for (std::size_t i = 0; i < rays.size() && !spread; ++i) {
    for (std::size_t j = i + 1; j < rays.size() && !spread; ++j) {
      spread = rays[i].direction.cross(rays[j].direction).norm() > min_sin;
    }
  }
  if (!spread) throw Error(ErrorCode::ParallelRays, "all rays are parallel");

  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& ray : rays) {
    const Mat3 p = Mat3::Identity() - ray.direction * ray.direction.transpose();
    a += p;
    b += p * ray.origin;
  }
  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3& sv = svd.singularValues();
  if (sv(2) < 1e-9 * sv(0)) throw Error(ErrorCode::ParallelRays, "ray system is rank deficient");

  Triangulation out;
  out.point = svd.solve(b);
  double ss = 0.0;
  for (const auto& ray : rays) {
    const double d = ray.distance_to(out.point);
    ss += d * d;
  }
  out.residual = std::sqrt(ss / static_cast<double>(rays.size()));
  return out;
}

Trajectory3D trajectory_from_frustum_pair(const Annotation& entry_i, const Annotation& exit_i,
                                          const Annotation& entry_j, const Annotation& exit_j,
                                          const FlyingFrustum& fr_i, const FlyingFrustum& fr_j) {
  const Ray r1i = ray_from_annotation(fr_i, entry_i);
  const Ray r2i = ray_from_annotation(fr_i, exit_i);
  const Ray r1j = ray_from_annotation(fr_j, entry_j);
  const Ray r2j = ray_from_annotation(fr_j, exit_j);

  const Vec3 ni = r1i.direction.cross(r2i.direction);
  const Vec3 nj = r1j.direction.cross(r2j.direction);
  if (ni.norm() < 1e-12 || nj.norm() < 1e-12) {
    throw Error(ErrorCode::CoplanarViews, "entry and exit rays coincide in one view");
  }
  const Vec3 d12 = ni.cross(nj);
  if (d12.norm() / (ni.norm() * nj.norm()) <= std::sin(deg2rad(kMinPlaneAngleDeg))) {
    throw Error(ErrorCode::CoplanarViews, "the two views span the same plane");
  }

  const Ray entry_rays[] = {r1i, r1j};
  const Ray exit_rays[] = {r2i, r2j};
  const Triangulation entry = triangulate(entry_rays);
  const Triangulation exit = triangulate(exit_rays);

  Trajectory3D out;
  out.direction = d12.normalized();
  if (out.direction.dot(exit.point - entry.point) < 0.0) out.direction = -out.direction;
  out.point = entry.point;
  out.residual = std::max(entry.residual, exit.residual);
  return out;
}

std::vector<ToolSilhouette> project_tool(const VirtualTool& tool,
                                         std::span<const FlyingFrustum> frustums) {
  tool.validate();
  std::vector<ToolSilhouette> out;
  out.reserve(frustums.size());
  for (const auto& fr : frustums) {
    fr.validate();
    ToolSilhouette silhouette;
    silhouette.reserve(tool.model_points.size());
    for (const auto& p : tool.model_points) {
      silhouette.push_back(try_frustum_project(fr, tool.pose.apply(p)));
    }
    out.push_back(std::move(silhouette));
  }
  return out;
}

double distance_to_polyline(const Vec2& p, const Polyline& line) {
  if (line.empty()) throw Error(ErrorCode::InvalidParams, "empty target polyline");
  if (line.size() == 1) return (p - line.front()).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

double consensus_residual(const VirtualTool& tool, std::span<const Polyline> targets,
                          std::span<const FlyingFrustum> frustums) {
  tool.validate();
  if (targets.size() != frustums.size()) {
    throw Error(ErrorCode::InvalidParams, "one target polyline per frustum is required");
  }
  if (frustums.size() < 2) {
    throw Error(ErrorCode::InvalidParams, "alignment consensus needs >= 2 frustums with targets");
  }
  const Vec3 a = tool.axis_start();
  const Vec3 b = tool.axis_end();
  double total = 0.0;
  for (std::size_t f = 0; f < frustums.size(); ++f) {
    const FlyingFrustum& fr = frustums[f];
    fr.validate();
    const RigidTransform w = fr.or_to_source();
    double sum = 0.0;
    int used = 0;
    for (int k = 0; k < kAxisSamples; ++k) {
      const double t = static_cast<double>(k) / (kAxisSamples - 1);
      auto px = try_project(fr.intrinsics, w, a + t * (b - a));
      if (!px) continue;
      sum += distance_to_polyline(*px, targets[f]);
      ++used;
    }
    if (used == 0) throw Error(ErrorCode::BehindSource, "tool is behind a frustum's source");
    total += fr.intrinsics.pixel_pitch * sum / used;
  }
  return total / static_cast<double>(frustums.size());
}

}  // namespace frustum
