#include "service.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace frustum {

using io::json;

namespace {

constexpr ErrorCode kReq = ErrorCode::BadRequest;

double opt_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return io::get_number(j, key, kReq);
}

std::string opt_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_string()) throw Error(kReq, std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

int get_index(const json& j, const char* key) {
  const json v = io::require(j, key, kReq);
  if (!v.is_number_integer()) throw Error(kReq, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error(kReq, "'" + s + "' is not an index");
  return v;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

LocalizerModel localizer_request(const json& j) {
  LocalizerModel m;
  m.rot_noise_norm_deg = opt_number(j, "rot_noise_norm_deg", m.rot_noise_norm_deg);
  m.trans_noise_norm_mm = opt_number(j, "trans_noise_norm_mm", m.trans_noise_norm_mm);
  if (j.contains("per_axis_trans")) m.per_axis_trans = io::vec3(j.at("per_axis_trans"), kReq);
  if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

json shot_summary(const Session& s, int k) {
  const SyntheticShot& shot = s.shot(k);
  json out;
  out["shot"] = k;
  out["source_pose"] = io::pose_wire(shot.frustum.source_pose);
  out["near_plane"] = shot.frustum.near_plane;
  out["intrinsics"] = io::intrinsics(shot.frustum.intrinsics);
  out["timestamp_ms"] = shot.frustum.image.timestamp_ms;
  json lm = json::array();
  for (const auto& l : shot.landmarks) {
    json e;
    e["name"] = l.name;
    e["pixel"] = l.visible ? io::vec(l.pixel) : json(nullptr);
    e["visible"] = l.visible;
    lm.push_back(e);
  }
  out["landmarks"] = lm;
  out["dose"] = shot.dose;
  out["total_dose"] = s.dose();
  out["image_url"] = "/sessions/" + s.id + "/shots/" + std::to_string(k) + "/image.png";
  return out;
}

json events_json(const Session& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    json ev;
    ev["t"] = e.t;
    ev["kind"] = event_kind_name(e.kind);
    ev["index"] = e.index;
    if (e.kind == EventKind::SetNearPlane) ev["near_plane"] = e.near_plane;
    events.push_back(ev);
  }
  return events;
}

// Entry -> exit polyline of a shot from its annotations.
Polyline default_target(const Session& s, int shot) {
  std::optional<Vec2> entry, exit;
  for (const auto& a : s.annotations) {
    if (a.frustum_id != shot) continue;
    if (a.label == AnnotationLabel::Entry) entry = a.point;
    if (a.label == AnnotationLabel::Exit) exit = a.point;
  }
  if (!entry || !exit) {
    throw Error(kReq, "shot " + std::to_string(shot) + " has no entry/exit annotations");
  }
  return {*entry, *exit};
}

Response json_response(int status, const json& body) {
  return {status, "application/json", io::dump(body, 0)};
}

}  // namespace

json error_body(ErrorCode code, const std::string& message) {
  json out;
  out["code"] = api_code(code);
  out["message"] = message;
  out["detail"] = {{"error", error_name(code)}};
  return out;
}

int http_status(ErrorCode code) {
  const std::string_view c = api_code(code);
  if (c == "not_found") return 404;
  if (c == "bad_request") return 400;
  if (c == "schema_mismatch") return 500;
  return 422;
}

json session_summary(const Session& s) {
  json out;
  out["id"] = s.id;
  out["phantom"] = phantom_kind_name(s.phantom.kind);
  out["events"] = s.events.size();
  out["shots"] = s.shots.size();
  out["annotations"] = s.annotations.size();
  out["plans"] = s.plans.size();
  out["executions"] = s.executions.size();
  out["clock"] = s.clock;
  out["metrics"] = io::metrics(session_metrics(s));
  return out;
}

Service::Service(std::filesystem::path state_dir) : dir_(std::move(state_dir)) {
  std::filesystem::create_directories(dir_);
}

Service::~Service() { stop(); }

std::filesystem::path Service::session_path(const std::string& id) const {
  if (!valid_id(id)) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
  return dir_ / (id + ".json");
}

Session Service::load(const std::string& id) const {
  const auto path = session_path(id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_session(ss.str());
}

void Service::store(const Session& s) const { save_session(s, session_path(s.id).string()); }

std::mutex& Service::writer(const std::string& id) {
  std::lock_guard lock(registry_mutex_);
  auto& m = writers_[id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

json Service::create(const json& req) {
  if (!req.is_object()) throw Error(kReq, "body must be an object");
  PhantomParams params;
  if (req.contains("phantom_pose")) {
    params.pose = io::pose_from_wire(req.at("phantom_pose"), FrameId::P, FrameId::OR, kReq);
  }
  Phantom phantom =
      build_phantom(parse_phantom_kind(opt_string(req, "phantom", "tube_in_cube")), params);

  SessionConfig config;
  const bool noiseless = req.contains("noiseless") && req.at("noiseless").get<bool>();
  config.localizer = noiseless ? LocalizerModel::noiseless()
                               : localizer_request(req.value("localizer", json::object()));
  config.pixel_noise_sigma = noiseless ? 0.0 : opt_number(req, "pixel_noise_sigma", 0.0);
  if (req.contains("intrinsics")) config.intrinsics = io::intrinsics_from(req.at("intrinsics"), kReq);
  if (req.contains("seed")) config.seed = req.at("seed").get<std::uint64_t>();

  RigidTransform truth = default_hand_eye();
  if (req.contains("hand_eye")) {
    truth = io::pose_from_wire(req.at("hand_eye"), FrameId::H, FrameId::X, kReq);
  }
  std::optional<CalibrationResult> cal;
  if (req.contains("calibration")) {
    cal = CalibrationResult{};
    cal->x = io::pose_from_wire(req.at("calibration"), FrameId::H, FrameId::X, kReq);
  }

  std::lock_guard lock(registry_mutex_);
  std::string id = opt_string(req, "id", "");
  if (!id.empty()) {
    if (!valid_id(id)) throw Error(kReq, "session ids use [A-Za-z0-9_-], at most 64 characters");
    if (std::filesystem::exists(session_path(id))) throw Error(kReq, "session '" + id + "' exists");
  } else {
    for (int n = 1;; ++n) {
      id = "session-" + std::to_string(n);
      if (!std::filesystem::exists(session_path(id))) break;
    }
  }
  Session s = open_session(id, std::move(phantom), config, truth, cal);
  store(s);
  json out;
  out["id"] = s.id;
  out["phantom"] = phantom_kind_name(s.phantom.kind);
  json lm = json::array();
  for (const auto& l : s.phantom.landmarks) lm.push_back(l.name);
  out["landmarks"] = lm;
  out["intrinsics"] = io::intrinsics(s.config.intrinsics);
  return out;
}

Response Service::route(const std::string& method, const std::vector<std::string>& parts,
                        const std::string& body) {
  const auto parse_body = [&]() -> json {
    if (body.empty()) return json::object();
    try {
      json j = json::parse(body);
      if (!j.is_object()) throw Error(kReq, "body must be a JSON object");
      return j;
    } catch (const json::exception& e) {
      throw Error(kReq, std::string("malformed JSON: ") + e.what());
    }
  };
  const auto not_found = [&]() -> Response {
    throw Error(ErrorCode::NotFound, "no route " + method);
  };

  if (parts.empty() || parts[0] != "sessions") return not_found();
  if (parts.size() == 1) {
    if (method == "POST") return json_response(201, create(parse_body()));
    if (method == "GET") {
      json ids = json::array();
      std::vector<std::string> names;
      for (const auto& e : std::filesystem::directory_iterator(dir_)) {
        if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
      }
      std::sort(names.begin(), names.end());
      for (const auto& n : names) ids.push_back(n);
      return json_response(200, {{"sessions", ids}});
    }
    return not_found();
  }

  const std::string& id = parts[1];
  const std::string sub = parts.size() > 2 ? parts[2] : "";

  // reads: the last committed file
  if (method == "GET") {
    if (parts.size() == 2) return json_response(200, session_summary(load(id)));
    if (sub == "replay" && parts.size() == 3) {
      std::ifstream in(session_path(id), std::ios::binary);
      if (!in) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      const Session s = replay(ss.str());
      json out;
      out["id"] = s.id;
      out["count"] = s.events.size();
      out["events"] = events_json(s);
      out["session"] = json::parse(ss.str());
      return json_response(200, out);
    }
    if (sub == "metrics" && parts.size() == 3) {
      return json_response(200, io::metrics(session_metrics(load(id))));
    }
    if (sub == "shots" && parts.size() == 4) {
      return json_response(200, shot_summary(load(id), parse_int(parts[3])));
    }
    if (sub == "shots" && parts.size() == 5 && parts[4] == "image.png") {
      const Session s = load(id);
      const SyntheticShot& shot = s.shot(parse_int(parts[3]));
      const auto png = render_shot_png(shot, shot.frustum.intrinsics);
      return {200, "image/png", std::string(png.begin(), png.end())};
    }
    return not_found();
  }

  // writes: one writer per session, load -> mutate -> commit
  const json req = parse_body();
  std::lock_guard lock(writer(id));
  Session s = load(id);
  json out;
  int status = 200;

  if (method == "POST" && sub == "acquire" && parts.size() == 3) {
    RigidTransform pose;
    if (req.contains("pose")) {
      pose = io::pose_from_wire(req.at("pose"), FrameId::X, FrameId::OR, kReq);
    } else {
      const Vec3 up = req.contains("up") ? io::vec3(req.at("up"), kReq) : Vec3::UnitZ();
      pose = look_at(io::vec3(io::require(req, "source", kReq), kReq),
                     io::vec3(io::require(req, "target", kReq), kReq), up);
    }
    acquire(s, pose);
    out = shot_summary(s, static_cast<int>(s.shots.size()) - 1);
    status = 201;
  } else if (method == "POST" && sub == "annotations" && parts.size() == 3) {
    Annotation a;
    a.frustum_id = req.contains("shot") ? get_index(req, "shot") : get_index(req, "frustum_id");
    a.point = io::vec2(io::require(req, "point", kReq), kReq);
    a.label = parse_label(opt_string(req, "label", "landmark"));
    if (req.contains("landmark") && req.at("landmark").is_string()) {
      a.landmark = s.phantom.landmark_index(req.at("landmark").get<std::string>());
    } else if (req.contains("landmark") && !req.at("landmark").is_null()) {
      a.landmark = get_index(req, "landmark");
    }
    a.author = opt_string(req, "author", "");
    const int index = annotate(s, a);
    const Annotation& stored = s.annotation(index);
    out["index"] = index;
    out["annotation"] = {{"shot", stored.frustum_id},
                         {"point", io::vec(stored.point)},
                         {"label", label_name(stored.label)},
                         {"landmark", stored.landmark},
                         {"author", stored.author},
                         {"timestamp_ms", stored.timestamp_ms}};
    out["ray"] = io::ray(ray_from_annotation(s.shot(stored.frustum_id).frustum, stored));
    status = 201;
  } else if (method == "POST" && sub == "plan" && parts.size() == 4 && parts[3] == "trajectory") {
    const json ids = io::require(req, "annotations", kReq);
    if (!ids.is_array() || ids.size() != 4) throw Error(kReq, "annotations must list 4 indices");
    std::array<int, 4> a{};
    for (std::size_t i = 0; i < 4; ++i) a[i] = ids[i].get<int>();
    const TrajectoryPlan& p = plan_trajectory(s, a);
    out["plan"] = static_cast<int>(s.plans.size()) - 1;
    out["trajectory"] = io::trajectory(p.trajectory);
  } else if (method == "POST" && sub == "plan" && parts.size() == 4 && parts[3] == "landmark") {
    const std::vector<int> ids = io::require(req, "annotations", kReq).get<std::vector<int>>();
    const LandmarkPlan& p = plan_landmark(s, ids);
    out["plan"] = static_cast<int>(s.plans.size()) - 1;
    out["point"] = io::vec(p.point);
    out["residual"] = p.residual;
  } else if (method == "POST" && sub == "plan" && parts.size() == 4 && parts[3] == "tool") {
    const ToolKind kind = parse_tool_kind(opt_string(req, "kind", "kwire"));
    const RigidTransform pose =
        io::pose_from_wire(io::require(req, "pose", kReq), FrameId::Tool, FrameId::OR, kReq);
    std::vector<int> shots;
    if (req.contains("shots")) {
      shots = req.at("shots").get<std::vector<int>>();
    } else {
      for (int k = 0; k < static_cast<int>(s.shots.size()); ++k) shots.push_back(k);
    }
    std::vector<Polyline> targets;
    if (req.contains("targets")) {
      for (const auto& line : req.at("targets")) {
        Polyline l;
        for (const auto& p : line) l.push_back(io::vec2(p, kReq));
        targets.push_back(l);
      }
    } else {
      for (int k : shots) targets.push_back(default_target(s, k));
    }
    const ToolPlan& p = plan_tool(s, VirtualTool::make(kind, pose), shots, targets);
    out["plan"] = static_cast<int>(s.plans.size()) - 1;
    json proj = json::array();
    for (std::size_t i = 0; i < p.projections.size(); ++i) {
      json pts = json::array();
      for (const auto& q : p.projections[i]) pts.push_back(q ? io::vec(*q) : json(nullptr));
      proj.push_back({{"shot", p.shots[i]}, {"points", pts}});
    }
    out["projections"] = proj;
    out["consensus_residual"] = p.consensus;
  } else if (method == "POST" && sub == "execute" && parts.size() == 3) {
    const bool tube = s.phantom.kind == PhantomKind::TubeInCube;
    const ToolKind kind = parse_tool_kind(opt_string(req, "kind", tube ? "kwire" : "impactor_cup"));
    Trajectory3D placed;
    if (req.contains("trajectory")) {
      placed = io::trajectory_from(req.at("trajectory"), kReq);
    } else {
      const TrajectoryPlan* latest = nullptr;
      for (const auto& p : s.plans) {
        if (const auto* t = std::get_if<TrajectoryPlan>(&p)) latest = t;
      }
      if (!latest) throw Error(kReq, "no trajectory given and none planned");
      placed = latest->trajectory;
    }
    const Execution& e = execute(s, kind, placed);
    out["execution"] = static_cast<int>(s.executions.size()) - 1;
    out["kwire_error"] = e.kwire ? io::kwire(*e.kwire) : json(nullptr);
    out["cup_angles"] = e.cup ? io::cup(*e.cup) : json(nullptr);
  } else if (method == "PATCH" && sub == "shots" && parts.size() == 5 && parts[4] == "near_plane") {
    const int k = parse_int(parts[3]);
    const double n = req.contains("n") ? io::get_number(req, "n", kReq)
                                       : io::get_number(req, "near_plane", kReq);
    const RigidTransform pose = set_near_plane(s, k, n);
    out["shot"] = k;
    out["near_plane"] = n;
    out["image_pose"] = io::pose_wire(pose);
  } else {
    return not_found();
  }
  store(s);
  return json_response(status, out);
}

Response Service::handle(const std::string& method, const std::string& path,
                         const std::string& body) {
  try {
    std::string p = path.substr(0, path.find('?'));
    std::vector<std::string> parts;
    std::stringstream ss(p);
    for (std::string seg; std::getline(ss, seg, '/');) {
      if (!seg.empty()) parts.push_back(seg);
    }
    return route(method, parts, body);
  } catch (const Error& e) {
    return json_response(http_status(e.code()), error_body(e.code(), e.what()));
  } catch (const json::exception& e) {
    return json_response(400, error_body(kReq, e.what()));
  } catch (const std::exception& e) {
    json body_json = error_body(kReq, e.what());
    body_json["detail"] = {{"error", "internal"}};
    return json_response(500, body_json);
  }
}

void Service::serve(const std::string& host, int port) {
  {
    std::lock_guard lock(server_mutex_);
    server_ = std::make_unique<httplib::Server>();
    const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      const Response r = handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server_->Get(".*", forward);
    server_->Post(".*", forward);
    server_->Patch(".*", forward);
    if (!server_->bind_to_port(host, port)) {
      server_.reset();
      throw Error(ErrorCode::InvalidParams,
                  "cannot bind " + host + ":" + std::to_string(port));
    }
  }
  server_->listen_after_bind();
}

void Service::stop() {
  std::lock_guard lock(server_mutex_);
  if (server_) server_->stop();
}

}  // namespace frustum
