#include "json_io.hpp"

#include <cmath>
#include <cstdio>

namespace frustum::io {

namespace {

void write_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParams, "non-finite number in JSON output");
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

bool is_flat(const json& j) {
  for (const auto& e : j) {
    if (e.is_structured()) return false;
  }
  return true;
}

void write(std::string& out, const json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent <= 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(k).dump();
        out += indent > 0 ? ": " : ":";
        write(out, v, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = is_flat(j);
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += flat && indent > 0 ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        write(out, v, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case json::value_t::number_float:
      write_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

}  // namespace

std::string dump(const json& j, int indent) {
  std::string out;
  write(out, j, indent, 0);
  return out;
}

json require(const json& j, const char* key, ErrorCode code) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(code, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

double get_number(const json& j, const char* key, ErrorCode code) {
  const json v = require(j, key, code);
  if (!v.is_number()) throw Error(code, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }
json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

namespace {

template <int N>
Eigen::Matrix<double, N, 1> read_vec(const json& j, ErrorCode code) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw Error(code, "expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw Error(code, "expected a number");
    out(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

FrameId read_frame(const json& j, const char* key, ErrorCode code) {
  const json v = require(j, key, code);
  if (!v.is_string()) throw Error(code, std::string("field '") + key + "' must be a frame name");
  try {
    return parse_frame(v.get<std::string>());
  } catch (const Error& e) {
    throw Error(code, e.what());
  }
}

}  // namespace

Vec2 vec2(const json& j, ErrorCode code) { return read_vec<2>(j, code); }
Vec3 vec3(const json& j, ErrorCode code) { return read_vec<3>(j, code); }

json pose_matrix(const RigidTransform& t) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation()(i, k));
  }
  json out;
  out["from"] = frame_name(t.from());
  out["to"] = frame_name(t.to());
  out["rotation"] = r;
  out["translation"] = vec(t.translation());
  return out;
}

RigidTransform pose_from_matrix(const json& j, ErrorCode code) {
  const json r = require(j, "rotation", code);
  const auto flat = read_vec<9>(r, code);
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) m(i, k) = flat(3 * i + k);
  }
  try {
    return {m, vec3(require(j, "translation", code), code), read_frame(j, "from", code),
            read_frame(j, "to", code)};
  } catch (const Error& e) {
    throw Error(code, e.what());
  }
}

json pose_wire(const RigidTransform& t) {
  const UnitQuaternion q = t.quaternion();
  json out;
  out["q"] = json::array({q.s(), q.v().x(), q.v().y(), q.v().z()});
  out["t"] = vec(t.translation());
  out["from"] = frame_name(t.from());
  out["to"] = frame_name(t.to());
  return out;
}

RigidTransform pose_from_wire(const json& j, FrameId from, FrameId to, ErrorCode code) {
  if (!j.is_object()) throw Error(code, "pose must be an object");
  const Vec4 q = read_vec<4>(require(j, "q", code), code);
  const Vec3 t = vec3(require(j, "t", code), code);
  if (j.contains("from")) from = read_frame(j, "from", code);
  if (j.contains("to")) to = read_frame(j, "to", code);
  try {
    return RigidTransform::from_quaternion(UnitQuaternion(q(0), q.tail<3>()), t, from, to);
  } catch (const Error& e) {
    throw Error(code, e.what());
  }
}

json intrinsics(const CameraIntrinsics& k) {
  json out;
  out["focal_length"] = k.focal_length;
  out["pixel_pitch"] = k.pixel_pitch;
  out["principal_point"] = vec(k.principal_point);
  out["image_size"] = vec(k.image_size);
  return out;
}

CameraIntrinsics intrinsics_from(const json& j, ErrorCode code) {
  CameraIntrinsics k;
  k.focal_length = get_number(j, "focal_length", code);
  k.pixel_pitch = get_number(j, "pixel_pitch", code);
  k.principal_point = vec2(require(j, "principal_point", code), code);
  k.image_size = vec2(require(j, "image_size", code), code);
  return k;
}

json localizer(const LocalizerModel& m) {
  json out;
  out["rot_noise_norm_deg"] = m.rot_noise_norm_deg;
  out["trans_noise_norm_mm"] = m.trans_noise_norm_mm;
  out["per_axis_trans"] = vec(m.per_axis_trans);
  out["seed"] = m.seed;
  return out;
}

LocalizerModel localizer_from(const json& j, ErrorCode code) {
  LocalizerModel m;
  m.rot_noise_norm_deg = get_number(j, "rot_noise_norm_deg", code);
  m.trans_noise_norm_mm = get_number(j, "trans_noise_norm_mm", code);
  m.per_axis_trans = vec3(require(j, "per_axis_trans", code), code);
  const json s = require(j, "seed", code);
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
    throw Error(code, "seed must be a non-negative integer");
  }
  m.seed = s.get<std::uint64_t>();
  return m;
}

json trajectory(const Trajectory3D& t) {
  json out;
  out["point"] = vec(t.point);
  out["direction"] = vec(t.direction);
  out["residual"] = t.residual;
  return out;
}

Trajectory3D trajectory_from(const json& j, ErrorCode code) {
  Trajectory3D t;
  t.point = vec3(require(j, "point", code), code);
  t.direction = vec3(require(j, "direction", code), code);
  t.residual = j.contains("residual") ? get_number(j, "residual", code) : 0.0;
  return t;
}

json ray(const Ray& r) {
  json out;
  out["origin"] = vec(r.origin);
  out["direction"] = vec(r.direction);
  return out;
}

json kwire(const KWireError& e) {
  json out;
  out["entry_dist"] = e.entry_dist;
  out["exit_dist"] = e.exit_dist;
  out["mean"] = e.mean;
  out["breached"] = e.breached;
  return out;
}

json cup(const CupOrientation& c) {
  json out;
  out["abduction_deg"] = c.abduction_deg;
  out["anteversion_deg"] = c.anteversion_deg;
  out["in_safe_zone"] = in_safe_zone(c);
  return out;
}

json calibration(const CalibrationResult& c) {
  json out;
  out["x"] = pose_wire(c.x);
  out["rotation_residual_deg"] = c.rotation_residual_deg;
  out["translation_residual_mm"] = c.translation_residual_mm;
  out["n_pairs"] = c.n_pairs;
  return out;
}

json metrics(const SessionMetrics& m) {
  json out;
  out["planned_kwire"] = m.planned_kwire ? kwire(*m.planned_kwire) : json(nullptr);
  out["kwire_error"] = m.executed_kwire ? kwire(*m.executed_kwire) : json(nullptr);
  out["cup_angles"] = m.executed_cup ? cup(*m.executed_cup) : json(nullptr);
  out["dose"] = m.dose;
  out["shots"] = m.shots;
  return out;
}

}  // namespace frustum::io
