#pragma once

// Intra-operative planning on flying frustums:
//  - annotated pixels back-project to rays, rays triangulate to landmarks and
//    entry/exit annotations on two views intersect to a 3D trajectory;
//  - a virtual tool is projected into every frustum and scored against 2D
//    targets (alignment consensus).

#include "frustum/flying_frustum.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace frustum {

enum class AnnotationLabel { Landmark, Entry, Exit };

std::string_view label_name(AnnotationLabel label) noexcept;
AnnotationLabel parse_label(std::string_view name);

struct Annotation {
  int frustum_id = 0;
  Vec2 point = Vec2::Zero();  // acquisition-image pixel
  AnnotationLabel label = AnnotationLabel::Landmark;
  int landmark = -1;  // landmark index l, only for Landmark labels
  std::string author;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Trajectory3D {
  Vec3 point = Vec3::Zero();  // anchored at the triangulated entry
  Vec3 direction = Vec3::UnitZ();
  double residual = 0.0;

  friend bool operator==(const Trajectory3D&, const Trajectory3D&) = default;
};

enum class ToolKind { KWire, Drill, ImpactorCup };

std::string_view tool_kind_name(ToolKind kind) noexcept;
ToolKind parse_tool_kind(std::string_view name);

// Model points are in the tool frame; points 0 and 1 are the axis end points.
struct VirtualTool {
  std::vector<Vec3> model_points;
  RigidTransform pose = RigidTransform::identity(FrameId::Tool, FrameId::OR);
  ToolKind kind = ToolKind::KWire;

  static constexpr double kKWireDiameter = 2.8;

  // Default geometry for a kind, axis along +z of the tool frame.
  static VirtualTool make(ToolKind kind, const RigidTransform& pose);

  void validate() const;
  friend bool operator==(const VirtualTool&, const VirtualTool&) = default;
  Vec3 axis_start() const { return pose.apply(model_points[0]); }
  Vec3 axis_end() const { return pose.apply(model_points[1]); }
};

// Source-to-landmark ray of an annotated acquisition pixel (InvalidParams if
// the pixel is outside the image).
Ray ray_from_annotation(const FlyingFrustum& fr, const Annotation& ann);

struct Triangulation {
  Vec3 point = Vec3::Zero();
  double residual = 0.0;  // RMS point-to-ray distance, mm
};

// Closed-form least-squares closest point to >= 2 rays. Throws ParallelRays.
Triangulation triangulate(std::span<const Ray> rays);

// Entry/exit annotations on two frustums -> 3D line. Throws CoplanarViews.
Trajectory3D trajectory_from_frustum_pair(const Annotation& entry_i, const Annotation& exit_i,
                                          const Annotation& entry_j, const Annotation& exit_j,
                                          const FlyingFrustum& fr_i, const FlyingFrustum& fr_j);

// Near-plane projections of every model point; nullopt marks points behind
// the source.
using ToolSilhouette = std::vector<std::optional<Vec2>>;
std::vector<ToolSilhouette> project_tool(const VirtualTool& tool,
                                         std::span<const FlyingFrustum> frustums);

using Polyline = std::vector<Vec2>;

double distance_to_polyline(const Vec2& p, const Polyline& line);

// Mean detector-plane distance (mm) between the projected tool axis and the
// target polyline of each frustum, averaged over frustums. Targets are in
// acquisition-image pixels. Requires >= 2 frustums with targets.
double consensus_residual(const VirtualTool& tool, std::span<const Polyline> targets,
                          std::span<const FlyingFrustum> frustums);

}  // namespace frustum
