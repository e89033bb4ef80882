#include "frustum/virtual_or.hpp"

#include "json_io.hpp"
#include "session_internal.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace frustum {

using io::json;

namespace {

constexpr ErrorCode kBad = ErrorCode::CorruptLog;

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::CorruptLog, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

template <typename T>
T get_int(const json& j, const char* key) {
  const json v = io::require(j, key, kBad);
  if (!v.is_number_integer()) throw Error(kBad, std::string("field '") + key + "' must be an integer");
  return v.get<T>();
}

std::string get_string(const json& j, const char* key) {
  const json v = io::require(j, key, kBad);
  if (!v.is_string()) throw Error(kBad, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

// --- writers ---------------------------------------------------------------

json phantom_json(const Phantom& p) {
  json out;
  out["kind"] = phantom_kind_name(p.kind);
  json lm = json::array();
  for (const auto& l : p.landmarks) {
    json e;
    e["name"] = l.name;
    e["position"] = io::vec(l.position);
    lm.push_back(e);
  }
  out["landmarks"] = lm;
  if (p.tube) {
    json t;
    t["axis_start"] = io::vec(p.tube->axis_start);
    t["axis_end"] = io::vec(p.tube->axis_end);
    t["diameter"] = p.tube->diameter;
    out["tube"] = t;
  } else {
    out["tube"] = nullptr;
  }
  out["pose"] = io::pose_matrix(p.pose);
  return out;
}

json frustum_json(const FlyingFrustum& f) {
  json out;
  out["intrinsics"] = io::intrinsics(f.intrinsics);
  out["source_pose"] = io::pose_matrix(f.source_pose);
  out["image"] = {{"path", f.image.path}, {"timestamp_ms", f.image.timestamp_ms}};
  out["near_plane"] = f.near_plane;
  return out;
}

json shot_json(const SyntheticShot& s) {
  json out;
  out["frustum"] = frustum_json(s.frustum);
  out["true_source_pose"] = io::pose_matrix(s.true_source_pose);
  json lm = json::array();
  for (const auto& l : s.landmarks) {
    json e;
    e["name"] = l.name;
    e["pixel"] = l.visible ? io::vec(l.pixel) : json(nullptr);
    e["visible"] = l.visible;
    lm.push_back(e);
  }
  out["landmarks"] = lm;
  out["pixel_noise_sigma"] = s.pixel_noise_sigma;
  out["dose"] = s.dose;
  return out;
}

json annotation_json(const Annotation& a) {
  json out;
  out["frustum_id"] = a.frustum_id;
  out["point"] = io::vec(a.point);
  out["label"] = label_name(a.label);
  out["landmark"] = a.landmark;
  out["author"] = a.author;
  out["timestamp_ms"] = a.timestamp_ms;
  return out;
}

json tool_json(const VirtualTool& t) {
  json out;
  out["kind"] = tool_kind_name(t.kind);
  out["pose"] = io::pose_matrix(t.pose);
  json pts = json::array();
  for (const auto& p : t.model_points) pts.push_back(io::vec(p));
  out["model_points"] = pts;
  return out;
}

json plan_json(const Plan& plan) {
  json out;
  if (const auto* p = std::get_if<TrajectoryPlan>(&plan)) {
    out["type"] = "trajectory";
    out["annotations"] = p->annotations;
    out["trajectory"] = io::trajectory(p->trajectory);
  } else if (const auto* p = std::get_if<LandmarkPlan>(&plan)) {
    out["type"] = "landmark";
    out["annotations"] = p->annotations;
    out["point"] = io::vec(p->point);
    out["residual"] = p->residual;
  } else {
    const auto& t = std::get<ToolPlan>(plan);
    out["type"] = "tool";
    out["tool"] = tool_json(t.tool);
    out["shots"] = t.shots;
    json targets = json::array();
    for (const auto& line : t.targets) {
      json l = json::array();
      for (const auto& p : line) l.push_back(io::vec(p));
      targets.push_back(l);
    }
    out["targets"] = targets;
    json proj = json::array();
    for (const auto& sil : t.projections) {
      json l = json::array();
      for (const auto& p : sil) l.push_back(p ? io::vec(*p) : json(nullptr));
      proj.push_back(l);
    }
    out["projections"] = proj;
    out["consensus"] = t.consensus;
  }
  return out;
}

json execution_json(const Execution& e) {
  json out;
  out["kind"] = tool_kind_name(e.kind);
  out["placed"] = io::trajectory(e.placed);
  out["kwire"] = e.kwire ? io::kwire(*e.kwire) : json(nullptr);
  out["cup"] = e.cup ? json{{"abduction_deg", e.cup->abduction_deg},
                            {"anteversion_deg", e.cup->anteversion_deg}}
                     : json(nullptr);
  return out;
}

json body_json(const Session& s) {
  json out;
  out["schema"] = kSessionSchema;
  out["id"] = s.id;
  json config;
  config["localizer"] = io::localizer(s.config.localizer);
  config["pixel_noise_sigma"] = s.config.pixel_noise_sigma;
  config["intrinsics"] = io::intrinsics(s.config.intrinsics);
  config["seed"] = s.config.seed;
  out["config"] = config;
  out["phantom"] = phantom_json(s.phantom);
  json cal;
  cal["x"] = io::pose_matrix(s.calibration.x);
  cal["rotation_residual_deg"] = s.calibration.rotation_residual_deg;
  cal["translation_residual_mm"] = s.calibration.translation_residual_mm;
  cal["n_pairs"] = s.calibration.n_pairs;
  out["calibration"] = cal;
  out["true_hand_eye"] = io::pose_matrix(s.true_hand_eye);
  json shots = json::array();
  for (const auto& shot : s.shots) shots.push_back(shot_json(shot));
  out["shots"] = shots;
  json anns = json::array();
  for (const auto& a : s.annotations) anns.push_back(annotation_json(a));
  out["annotations"] = anns;
  json plans = json::array();
  for (const auto& p : s.plans) plans.push_back(plan_json(p));
  out["plans"] = plans;
  json execs = json::array();
  for (const auto& e : s.executions) execs.push_back(execution_json(e));
  out["executions"] = execs;
  json events = json::array();
  for (const auto& e : s.events) {
    json ev;
    ev["t"] = e.t;
    ev["kind"] = event_kind_name(e.kind);
    ev["index"] = e.index;
    ev["near_plane"] = e.near_plane;
    events.push_back(ev);
  }
  out["events"] = events;
  json outcome = io::metrics(session_metrics(s));
  out["outcome"] = outcome;
  out["clock"] = s.clock;
  return out;
}

// --- readers ---------------------------------------------------------------

template <typename F>
auto wrap(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaMismatch || e.code() == ErrorCode::CorruptLog) throw;
    throw Error(kBad, e.what());
  } catch (const json::exception& e) {
    throw Error(kBad, e.what());
  }
}

Phantom phantom_from(const json& j) {
  Phantom p;
  p.kind = parse_phantom_kind(get_string(j, "kind"));
  for (const auto& l : io::require(j, "landmarks", kBad)) {
    p.landmarks.push_back({get_string(l, "name"), io::vec3(io::require(l, "position", kBad), kBad)});
  }
  const json t = io::require(j, "tube", kBad);
  if (!t.is_null()) {
    p.tube = TubePhantomSpec{io::vec3(io::require(t, "axis_start", kBad), kBad),
                             io::vec3(io::require(t, "axis_end", kBad), kBad),
                             io::get_number(t, "diameter", kBad)};
  }
  p.pose = io::pose_from_matrix(io::require(j, "pose", kBad), kBad);
  p.validate();
  return p;
}

FlyingFrustum frustum_from(const json& j) {
  FlyingFrustum f;
  f.intrinsics = io::intrinsics_from(io::require(j, "intrinsics", kBad), kBad);
  f.source_pose = io::pose_from_matrix(io::require(j, "source_pose", kBad), kBad);
  const json img = io::require(j, "image", kBad);
  f.image.path = get_string(img, "path");
  f.image.timestamp_ms = get_int<std::int64_t>(img, "timestamp_ms");
  f.near_plane = io::get_number(j, "near_plane", kBad);
  f.validate();
  return f;
}

SyntheticShot shot_from(const json& j) {
  SyntheticShot s;
  s.frustum = frustum_from(io::require(j, "frustum", kBad));
  s.true_source_pose = io::pose_from_matrix(io::require(j, "true_source_pose", kBad), kBad);
  for (const auto& l : io::require(j, "landmarks", kBad)) {
    LandmarkObservation o;
    o.name = get_string(l, "name");
    o.visible = io::require(l, "visible", kBad).get<bool>();
    const json px = io::require(l, "pixel", kBad);
    if (o.visible) o.pixel = io::vec2(px, kBad);
    s.landmarks.push_back(o);
  }
  s.pixel_noise_sigma = io::get_number(j, "pixel_noise_sigma", kBad);
  s.dose = io::get_number(j, "dose", kBad);
  return s;
}

Annotation annotation_from(const json& j) {
  Annotation a;
  a.frustum_id = get_int<int>(j, "frustum_id");
  a.point = io::vec2(io::require(j, "point", kBad), kBad);
  a.label = parse_label(get_string(j, "label"));
  a.landmark = get_int<int>(j, "landmark");
  a.author = get_string(j, "author");
  a.timestamp_ms = get_int<std::int64_t>(j, "timestamp_ms");
  return a;
}

std::vector<int> int_list(const json& j) {
  if (!j.is_array()) throw Error(kBad, "expected an integer list");
  std::vector<int> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw Error(kBad, "expected an integer");
    out.push_back(v.get<int>());
  }
  return out;
}

VirtualTool tool_from(const json& j) {
  VirtualTool t;
  t.kind = parse_tool_kind(get_string(j, "kind"));
  t.pose = io::pose_from_matrix(io::require(j, "pose", kBad), kBad);
  for (const auto& p : io::require(j, "model_points", kBad)) t.model_points.push_back(io::vec3(p, kBad));
  t.validate();
  return t;
}

Plan plan_from(const json& j) {
  const std::string type = get_string(j, "type");
  if (type == "trajectory") {
    TrajectoryPlan p;
    const auto ids = int_list(io::require(j, "annotations", kBad));
    if (ids.size() != 4) throw Error(kBad, "trajectory plan needs 4 annotations");
    std::copy(ids.begin(), ids.end(), p.annotations.begin());
    p.trajectory = io::trajectory_from(io::require(j, "trajectory", kBad), kBad);
    return p;
  }
  if (type == "landmark") {
    LandmarkPlan p;
    p.annotations = int_list(io::require(j, "annotations", kBad));
    p.point = io::vec3(io::require(j, "point", kBad), kBad);
    p.residual = io::get_number(j, "residual", kBad);
    return p;
  }
  if (type == "tool") {
    ToolPlan p;
    p.tool = tool_from(io::require(j, "tool", kBad));
    p.shots = int_list(io::require(j, "shots", kBad));
    for (const auto& line : io::require(j, "targets", kBad)) {
      Polyline l;
      for (const auto& v : line) l.push_back(io::vec2(v, kBad));
      p.targets.push_back(l);
    }
    for (const auto& sil : io::require(j, "projections", kBad)) {
      ToolSilhouette s;
      for (const auto& v : sil) {
        s.push_back(v.is_null() ? std::nullopt : std::optional<Vec2>(io::vec2(v, kBad)));
      }
      p.projections.push_back(s);
    }
    p.consensus = io::get_number(j, "consensus", kBad);
    return p;
  }
  throw Error(kBad, "unknown plan type '" + type + "'");
}

Execution execution_from(const json& j) {
  Execution e;
  e.kind = parse_tool_kind(get_string(j, "kind"));
  e.placed = io::trajectory_from(io::require(j, "placed", kBad), kBad);
  const json k = io::require(j, "kwire", kBad);
  if (!k.is_null()) {
    e.kwire = KWireError{io::get_number(k, "entry_dist", kBad), io::get_number(k, "exit_dist", kBad),
                         io::get_number(k, "mean", kBad),
                         io::require(k, "breached", kBad).get<bool>()};
  }
  const json c = io::require(j, "cup", kBad);
  if (!c.is_null()) {
    e.cup = CupOrientation{io::get_number(c, "abduction_deg", kBad),
                           io::get_number(c, "anteversion_deg", kBad)};
  }
  return e;
}

Session session_from(const json& j) {
  Session s;
  s.id = get_string(j, "id");
  const json config = io::require(j, "config", kBad);
  s.config.localizer = io::localizer_from(io::require(config, "localizer", kBad), kBad);
  s.config.pixel_noise_sigma = io::get_number(config, "pixel_noise_sigma", kBad);
  s.config.intrinsics = io::intrinsics_from(io::require(config, "intrinsics", kBad), kBad);
  s.config.seed = io::require(config, "seed", kBad).get<std::uint64_t>();
  s.phantom = phantom_from(io::require(j, "phantom", kBad));
  const json cal = io::require(j, "calibration", kBad);
  s.calibration.x = io::pose_from_matrix(io::require(cal, "x", kBad), kBad);
  s.calibration.rotation_residual_deg = io::get_number(cal, "rotation_residual_deg", kBad);
  s.calibration.translation_residual_mm = io::get_number(cal, "translation_residual_mm", kBad);
  s.calibration.n_pairs = get_int<int>(cal, "n_pairs");
  s.true_hand_eye = io::pose_from_matrix(io::require(j, "true_hand_eye", kBad), kBad);
  for (const auto& v : io::require(j, "shots", kBad)) s.shots.push_back(shot_from(v));
  for (const auto& v : io::require(j, "annotations", kBad)) s.annotations.push_back(annotation_from(v));
  for (const auto& v : io::require(j, "plans", kBad)) s.plans.push_back(plan_from(v));
  for (const auto& v : io::require(j, "executions", kBad)) s.executions.push_back(execution_from(v));
  for (const auto& v : io::require(j, "events", kBad)) {
    Event e;
    e.t = get_int<std::int64_t>(v, "t");
    e.kind = parse_event_kind(get_string(v, "kind"));
    e.index = get_int<int>(v, "index");
    e.near_plane = io::get_number(v, "near_plane", kBad);
    s.events.push_back(e);
  }
  s.clock = get_int<std::int64_t>(j, "clock");
  return s;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::CorruptLog, "replay mismatch: " + what);
}

}  // namespace

std::string serialize_session(const Session& session) {
  json doc = body_json(session);
  doc["hash"] = sha256_hex(io::dump(doc));
  return io::dump(doc) + "\n";
}

Session parse_session(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, std::string("session file does not parse: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::CorruptLog, "session file is not an object");
  if (!doc.contains("schema") || !doc["schema"].is_string()) {
    throw Error(ErrorCode::SchemaMismatch, "session file has no schema");
  }
  if (doc["schema"].get<std::string>() != kSessionSchema) {
    throw Error(ErrorCode::SchemaMismatch,
                "unsupported schema '" + doc["schema"].get<std::string>() + "'");
  }
  if (!doc.contains("hash") || !doc["hash"].is_string()) {
    throw Error(ErrorCode::CorruptLog, "session file has no content hash");
  }
  const std::string hash = doc["hash"].get<std::string>();
  doc.erase("hash");
  if (sha256_hex(io::dump(doc)) != hash) {
    throw Error(ErrorCode::CorruptLog, "content hash mismatch");
  }
  return wrap([&] { return session_from(doc); });
}

Session replay(std::string_view text) {
  const Session rec = parse_session(text);
  return wrap([&] {
    check(!rec.events.empty() && rec.events[0].kind == EventKind::Create, "log must open with create");
    std::optional<CalibrationResult> cal = rec.calibration;
    Session s = open_session(rec.id, rec.phantom, rec.config, rec.true_hand_eye, cal);
    for (std::size_t i = 1; i < rec.events.size(); ++i) {
      const Event& e = rec.events[i];
      const std::size_t idx = static_cast<std::size_t>(e.index);
      const std::string where = "event " + std::to_string(i);
      switch (e.kind) {
        case EventKind::Create:
          check(false, where + " repeats create");
          break;
        case EventKind::Acquire:
          check(e.index == static_cast<int>(s.shots.size()) && idx < rec.shots.size(),
                where + " acquires out of order");
          detail::append_shot(s, rec.shots[idx]);
          break;
        case EventKind::Annotate:
          check(e.index == static_cast<int>(s.annotations.size()) && idx < rec.annotations.size(),
                where + " annotates out of order");
          annotate(s, rec.annotations[idx]);
          check(s.annotations.back() == rec.annotations[idx], where + " annotation differs");
          break;
        case EventKind::SetNearPlane:
          set_near_plane(s, e.index, e.near_plane);
          break;
        case EventKind::Plan: {
          check(e.index == static_cast<int>(s.plans.size()) && idx < rec.plans.size(),
                where + " plans out of order");
          const Plan& p = rec.plans[idx];
          if (const auto* t = std::get_if<TrajectoryPlan>(&p)) {
            check(plan_trajectory(s, t->annotations) == *t, where + " trajectory differs");
          } else if (const auto* l = std::get_if<LandmarkPlan>(&p)) {
            check(plan_landmark(s, l->annotations) == *l, where + " landmark differs");
          } else {
            const auto& tp = std::get<ToolPlan>(p);
            check(plan_tool(s, tp.tool, tp.shots, tp.targets) == tp, where + " tool plan differs");
          }
          break;
        }
        case EventKind::Execute:
          check(e.index == static_cast<int>(s.executions.size()) && idx < rec.executions.size(),
                where + " executes out of order");
          check(execute(s, rec.executions[idx].kind, rec.executions[idx].placed) ==
                    rec.executions[idx],
                where + " execution differs");
          break;
      }
      check(s.events.back() == e, where + " differs from the log");
    }
    check(s.shots == rec.shots, "final shots differ");
    check(s.annotations.size() == rec.annotations.size() && s.plans.size() == rec.plans.size() &&
              s.executions.size() == rec.executions.size(),
          "log does not account for every record");
    check(s.clock == rec.clock, "clock differs");
    return s;
  });
}

Session replay_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return replay(ss.str());
}

void save_session(const Session& session, const std::string& path) {
  const std::string text = serialize_session(session);
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidParams, "cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error(ErrorCode::InvalidParams, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

std::vector<unsigned char> render_shot_png(const SyntheticShot& shot,
                                           const CameraIntrinsics& intrinsics) {
  const int w = static_cast<int>(std::lround(intrinsics.image_size.x()));
  const int h = static_cast<int>(std::lround(intrinsics.image_size.y()));
  if (w <= 0 || h <= 0) throw Error(ErrorCode::InvalidParams, "empty image");
  std::vector<unsigned char> pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 200);
  constexpr double kRadius = 6.0;
  for (const auto& l : shot.landmarks) {
    if (!l.visible) continue;
    const int u0 = static_cast<int>(std::floor(l.pixel.x() - kRadius));
    const int v0 = static_cast<int>(std::floor(l.pixel.y() - kRadius));
    for (int v = std::max(v0, 0); v <= std::min(v0 + 13, h - 1); ++v) {
      for (int u = std::max(u0, 0); u <= std::min(u0 + 13, w - 1); ++u) {
        if ((Vec2(u + 0.5, v + 0.5) - l.pixel).norm() <= kRadius) {
          pixels[static_cast<std::size_t>(v) * static_cast<std::size_t>(w) +
                 static_cast<std::size_t>(u)] = 30;
        }
      }
    }
  }

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::InvalidParams, "libpng initialisation failed");
  }
  std::vector<unsigned char> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::InvalidParams, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* buf = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int v = 0; v < h; ++v) {
    png_write_row(png, pixels.data() + static_cast<std::size_t>(v) * static_cast<std::size_t>(w));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace frustum
