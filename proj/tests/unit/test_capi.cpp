// Exercises the shared library through its C interface only.

#include <doctest.h>

#include <frustum/frustum.h>

#include <httplib.h>
#include <json.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <thread>

using json = nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  frustum_string_free(s);
  return out;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

struct Reply {
  int status = 0;
  json body;
  std::string raw;
  std::string type;
};

Reply call(frustum_service* svc, const std::string& method, const std::string& path,
           const std::string& body = "") {
  int status = 0;
  char* type = nullptr;
  char* out = nullptr;
  size_t len = 0;
  REQUIRE(frustum_service_handle(svc, method.c_str(), path.c_str(), body.data(), body.size(),
                                 &status, &type, &out, &len) == FRUSTUM_OK);
  Reply r;
  r.status = status;
  r.raw.assign(out, len);
  r.type = take(type);
  frustum_string_free(out);
  if (r.type == "application/json") r.body = json::parse(r.raw);
  return r;
}


// create -> acquire x2 -> annotate x4 -> plan/trajectory -> execute
std::string run_workflow(frustum_service* svc) {
  Reply c = call(svc, "POST", "/sessions", R"({"phantom": "tube_in_cube", "noiseless": true})");
  REQUIRE(c.status == 201);
  const std::string id = c.body["id"];
  const std::string base = "/sessions/" + id;
  const json views[] = {{{"source", {0, -600, 0}}, {"target", {0, 0, 0}}},
                        {{"source", {0, 0, 600}}, {"target", {0, 0, 0}}, {"up", {1, 0, 0}}}};
  std::vector<json> shots;
  for (const auto& v : views) {
    Reply a = call(svc, "POST", base + "/acquire", v.dump());
    REQUIRE(a.status == 201);
    shots.push_back(a.body);
  }
  std::vector<int> ids;
  for (int k = 0; k < 2; ++k) {
    for (const char* label : {"entry", "exit"}) {
      const std::string name = std::string("tube_") + label;
      json px;
      for (const auto& l : shots[k]["landmarks"]) {
        if (l["name"] == name) px = l["pixel"];
      }
      Reply r = call(svc, "POST", base + "/annotations",
                     json{{"shot", k}, {"point", px}, {"label", label}, {"author", "test"}}.dump());
      REQUIRE(r.status == 201);
      CHECK(r.body["ray"]["direction"].size() == 3);
      ids.push_back(r.body["index"]);
    }
  }
  Reply t = call(svc, "POST", base + "/plan/trajectory", json{{"annotations", ids}}.dump());
  REQUIRE(t.status == 200);
  // default phantom: tube from (-30, -6, -8) to (30, 6, 8)
  const json& traj = t.body["trajectory"];
  const double p[3] = {traj["point"][0], traj["point"][1], traj["point"][2]};
  CHECK(std::abs(p[0] + 30) < 1e-6);
  CHECK(std::abs(p[1] + 6) < 1e-6);
  CHECK(std::abs(p[2] + 8) < 1e-6);
  const double d[3] = {traj["direction"][0], traj["direction"][1], traj["direction"][2]};
  const double n = std::sqrt(60.0 * 60 + 12 * 12 + 16 * 16);
  CHECK(std::abs(d[0] - 60 / n) < 1e-6);
  CHECK(std::abs(d[1] - 12 / n) < 1e-6);
  CHECK(std::abs(d[2] - 16 / n) < 1e-6);
  Reply e = call(svc, "POST", base + "/execute", "{}");
  REQUIRE(e.status == 200);
  CHECK(e.body["kwire_error"]["mean"].get<double>() < 1e-6);
  return id;
}

}  // namespace

TEST_CASE("status names cover every module error") {
  CHECK(std::string(frustum_status_name(FRUSTUM_E_INSUFFICIENT_DATA)) == "insufficient_data");
  CHECK(std::string(frustum_status_api_code(FRUSTUM_E_INSUFFICIENT_DATA)) == "degenerate_motion");
  const std::vector<std::string> allowed{"frame_mismatch",       "degenerate_motion",
                                         "parallel_rays",        "coplanar_views",
                                         "near_plane_out_of_range", "schema_mismatch",
                                         "not_found",            "bad_request"};
  for (int s = FRUSTUM_E_FRAME_MISMATCH; s <= FRUSTUM_E_BAD_REQUEST; ++s) {
    const std::string code = frustum_status_api_code(static_cast<frustum_status>(s));
    CHECK(std::find(allowed.begin(), allowed.end(), code) != allowed.end());
  }
}

TEST_CASE("calibration through the C API") {
  char* pairs = nullptr;
  REQUIRE(frustum_generate_pairs(R"({"n": 10, "seed": 4})", &pairs) == FRUSTUM_OK);
  const std::string text = take(pairs);
  char* out = nullptr;
  REQUIRE(frustum_calibrate(text.c_str(), &out) == FRUSTUM_OK);
  const json r = json::parse(take(out));
  CHECK(r["rotation_residual_deg"].get<double>() < 1e-9);
  CHECK(r["translation_residual_mm"].get<double>() < 1e-9);
  CHECK(r["error"]["rot_deg"].get<double>() < 1e-9);
  CHECK(r["error"]["trans_mm"].get<double>() < 1e-9);

  json one = json::parse(text);
  one["pairs"] = json::array({one["pairs"][0]});
  CHECK(frustum_calibrate(one.dump().c_str(), &out) == FRUSTUM_E_INSUFFICIENT_DATA);
  CHECK(std::string(frustum_last_error()).size() > 0);
  CHECK(frustum_calibrate("{not json", &out) == FRUSTUM_E_BAD_REQUEST);
  CHECK(frustum_calibrate(R"({"schema": "other"})", &out) == FRUSTUM_E_SCHEMA_MISMATCH);
}

TEST_CASE("sampling CSV has one row per size") {
  char* pairs = nullptr;
  REQUIRE(frustum_generate_pairs(R"({"n": 120, "seed": 5, "rot_sigma_deg": 0.5, "trans_sigma_mm": 2})",
                                 &pairs) == FRUSTUM_OK);
  const std::string text = take(pairs);
  const int sizes[] = {5, 10, 20, 40, 80, 120};
  char* csv = nullptr;
  REQUIRE(frustum_sampling_csv(text.c_str(), sizes, 6, 20, 1, &csv) == FRUSTUM_OK);
  const std::string out = take(csv);
  CHECK(std::count(out.begin(), out.end(), '\n') == 7);
}

TEST_CASE("triangulation through the C API") {
  const double origins[] = {500, 0, 0, 0, 400, 90};
  const double p[3] = {12, -7, 33};
  const double dirs[] = {p[0] - 500, p[1], p[2], p[0], p[1] - 400, p[2] - 90};
  double point[3];
  double residual = -1;
  REQUIRE(frustum_triangulate(origins, dirs, 2, point, &residual) == FRUSTUM_OK);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(point[i] - p[i]) < 1e-9);
  CHECK(residual < 1e-9);
  const double par[] = {0, 0, 1, 0, 0, 1};
  CHECK(frustum_triangulate(origins, par, 2, point, &residual) == FRUSTUM_E_PARALLEL_RAYS);
}

TEST_CASE("experiments through the C API") {
  const auto dir = fresh_dir("frustum_capi_sessions");
  char* csv = nullptr;
  REQUIRE(frustum_run_experiment("kwire", R"({"repeats": 3, "noise_scales": [0]})",
                                 dir.string().c_str(), &csv) == FRUSTUM_OK);
  const std::string out = take(csv);
  CHECK(std::count(out.begin(), out.end(), '\n') == 4);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    char* summary = nullptr;
    REQUIRE(frustum_replay_file(e.path().string().c_str(), &summary) == FRUSTUM_OK);
    CHECK(json::parse(take(summary))["shots"] == 2);
    ++files;
  }
  CHECK(files == 3);
  CHECK(frustum_run_experiment("hip", nullptr, nullptr, &csv) == FRUSTUM_E_INVALID_PARAMS);
  char* summary = nullptr;
  CHECK(frustum_replay_file("missing.json", &summary) == FRUSTUM_E_NOT_FOUND);
  CHECK(std::string(frustum_status_api_code(FRUSTUM_E_NOT_FOUND)) == "not_found");
  std::filesystem::remove_all(dir);
}

TEST_CASE("service workflow recovers the phantom trajectory and logs every mutation") {
  const auto dir = fresh_dir("frustum_service_state");
  frustum_service* svc = nullptr;
  REQUIRE(frustum_service_create(dir.string().c_str(), &svc) == FRUSTUM_OK);
  const std::string id = run_workflow(svc);
  const std::string base = "/sessions/" + id;

  Reply log = call(svc, "GET", base + "/replay");
  REQUIRE(log.status == 200);
  REQUIRE(log.body["count"] == 9);
  const char* kinds[] = {"create",   "acquire",  "acquire", "annotate", "annotate",
                         "annotate", "annotate", "plan",    "execute"};
  for (int i = 0; i < 9; ++i) CHECK(log.body["events"][i]["kind"] == kinds[i]);

  Reply m = call(svc, "GET", base + "/metrics");
  CHECK(m.body["kwire_error"]["mean"].get<double>() < 1e-6);
  CHECK(std::abs(m.body["dose"].get<double>() - 0.255) < 1e-12);

  Reply img = call(svc, "GET", base + "/shots/0/image.png");
  CHECK(img.status == 200);
  CHECK(img.type == "image/png");
  CHECK(img.raw.substr(1, 3) == "PNG");

  // restart on the same directory: identical log
  frustum_service_destroy(svc);
  REQUIRE(frustum_service_create(dir.string().c_str(), &svc) == FRUSTUM_OK);
  CHECK(call(svc, "GET", base + "/replay").raw == log.raw);
  frustum_service_destroy(svc);
  std::filesystem::remove_all(dir);
}

TEST_CASE("service errors") {
  const auto dir = fresh_dir("frustum_service_errors");
  frustum_service* svc = nullptr;
  REQUIRE(frustum_service_create(dir.string().c_str(), &svc) == FRUSTUM_OK);
  const std::string id = run_workflow(svc);
  const std::string base = "/sessions/" + id;

  Reply far = call(svc, "PATCH", base + "/shots/0/near_plane", R"({"n": 1500})");
  CHECK(far.status == 422);
  CHECK(far.body["code"] == "near_plane_out_of_range");
  Reply ok = call(svc, "PATCH", base + "/shots/0/near_plane", R"({"n": 400})");
  CHECK(ok.status == 200);
  CHECK(ok.body["image_pose"]["from"] == "I");

  Reply bad = call(svc, "POST", base + "/annotations", "{\"shot\": 0,");
  CHECK(bad.status == 400);
  CHECK(bad.body["code"] == "bad_request");
  CHECK(bad.body.contains("message"));
  CHECK(bad.body.contains("detail"));

  CHECK(call(svc, "GET", "/sessions/nope/replay").body["code"] == "not_found");
  CHECK(call(svc, "POST", base + "/acquire", R"({"pose": {"q": [0, 0, 0, 0], "t": [0, 0, 0]}})")
            .body["code"] == "bad_request");
  CHECK(call(svc, "POST", base + "/plan/trajectory", R"({"annotations": [0, 1, 0, 1]})")
            .body["code"] == "coplanar_views");

  // failed requests leave the log untouched: 9 events + 1 near-plane change
  CHECK(call(svc, "GET", base + "/replay").body["count"] == 10);

  Reply tool = call(svc, "POST", base + "/plan/tool",
                    R"({"kind": "kwire", "pose": {"q": [0.70710678118654757, 0, 0.70710678118654757, 0], "t": [-30, -6, -8]}})");
  REQUIRE(tool.status == 200);
  CHECK(tool.body["projections"].size() == 2);
  CHECK(tool.body["consensus_residual"].get<double>() >= 0.0);
  frustum_service_destroy(svc);
  std::filesystem::remove_all(dir);
}

// An unused loopback port. httplib::Server keeps its socket open after
// destruction, so probing with it would leave a second bound socket behind.
int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  REQUIRE(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
  ::close(fd);
  return ntohs(addr.sin_port);
}

TEST_CASE("HTTP transport") {
  const auto dir = fresh_dir("frustum_service_http");
  frustum_service* svc = nullptr;
  REQUIRE(frustum_service_create(dir.string().c_str(), &svc) == FRUSTUM_OK);
  const int port = free_port();
  frustum_status served = FRUSTUM_E_INTERNAL;
  std::thread th([&] { served = frustum_service_serve(svc, "127.0.0.1", port); });
  httplib::Client cli("127.0.0.1", port);
  httplib::Result res;
  for (int i = 0; i < 100 && !res; ++i) {
    res = cli.Post("/sessions", R"({"phantom": "pelvis_landmarks"})", "application/json");
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = json::parse(res->body)["id"];
  auto a = cli.Post(("/sessions/" + id + "/acquire").c_str(),
                    R"({"source": [0, 600, 0], "target": [0, 0, 0]})", "application/json");
  REQUIRE(a);
  CHECK(a->status == 201);
  auto p = cli.Patch(("/sessions/" + id + "/shots/0/near_plane").c_str(), R"({"n": 2000})",
                     "application/json");
  REQUIRE(p);
  CHECK(p->status == 422);
  auto m = cli.Get(("/sessions/" + id + "/metrics").c_str());
  REQUIRE(m);
  CHECK(json::parse(m->body)["shots"] == 1);
  frustum_service_stop(svc);
  th.join();
  CHECK(served == FRUSTUM_OK);
  frustum_service_destroy(svc);
  std::filesystem::remove_all(dir);
}
