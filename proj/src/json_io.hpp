#pragma once

// JSON encoding shared by the session file, the C API and the service.

#include "frustum/error.hpp"
#include "frustum/virtual_or.hpp"

#include <json.hpp>

#include <string>

namespace frustum::io {

using json = nlohmann::ordered_json;

// Deterministic writer: floats with 17 significant digits, negative zero as
// 0, arrays of scalars on one line.
std::string dump(const json& j, int indent = 2);

// Typed access; a wrong type or missing key throws Error(code).
double get_number(const json& j, const char* key, ErrorCode code);
json require(const json& j, const char* key, ErrorCode code);

json vec(const Vec2& v);
json vec(const Vec3& v);
Vec2 vec2(const json& j, ErrorCode code);
Vec3 vec3(const json& j, ErrorCode code);

// Session files carry the row-major rotation matrix, so poses survive a
// round trip bit for bit.
json pose_matrix(const RigidTransform& t);
RigidTransform pose_from_matrix(const json& j, ErrorCode code);

// Wire format: {"q": [s, x, y, z], "t": [x, y, z], "from", "to"}.
json pose_wire(const RigidTransform& t);
RigidTransform pose_from_wire(const json& j, FrameId from, FrameId to, ErrorCode code);

json intrinsics(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from(const json& j, ErrorCode code);

json localizer(const LocalizerModel& m);
LocalizerModel localizer_from(const json& j, ErrorCode code);

json trajectory(const Trajectory3D& t);
Trajectory3D trajectory_from(const json& j, ErrorCode code);

json ray(const Ray& r);
json kwire(const KWireError& e);
json cup(const CupOrientation& c);
json calibration(const CalibrationResult& c);

json metrics(const SessionMetrics& m);

}  // namespace frustum::io
