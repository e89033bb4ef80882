#include "frustum/frustum.h"

#include "frustum/handeye.hpp"
#include "frustum/virtual_or.hpp"
#include "json_io.hpp"
#include "service.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>

struct frustum_service {
  std::unique_ptr<frustum::Service> impl;
};

namespace {

using frustum::Error;
using frustum::ErrorCode;
using frustum::io::json;

constexpr ErrorCode kReq = ErrorCode::BadRequest;

thread_local std::string g_last_error;

frustum_status to_status(ErrorCode code) {
  return static_cast<frustum_status>(static_cast<int>(code) + 1);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

template <typename F>
frustum_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return FRUSTUM_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return to_status(kReq);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FRUSTUM_E_INTERNAL;
  }
}

void require_out(const void* p) {
  if (!p) throw Error(ErrorCode::InvalidParams, "null output pointer");
}

json parse_json(const char* text) {
  if (!text) throw Error(kReq, "null JSON input");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(kReq, std::string("malformed JSON: ") + e.what());
  }
}

constexpr const char* kPairsSchema = "frustum-pairs/v1";

struct PairsFile {
  std::vector<frustum::PosePair> pairs;
  std::optional<frustum::RigidTransform> ground_truth;
};

PairsFile parse_pairs(const char* text) {
  const json doc = parse_json(text);
  if (!doc.is_object() || doc.value("schema", "") != kPairsSchema) {
    throw Error(ErrorCode::SchemaMismatch, std::string("expected schema ") + kPairsSchema);
  }
  PairsFile out;
  if (doc.contains("ground_truth") && !doc.at("ground_truth").is_null()) {
    out.ground_truth = frustum::io::pose_from_wire(doc.at("ground_truth"), frustum::FrameId::H,
                                                   frustum::FrameId::X, kReq);
  }
  for (const auto& p : frustum::io::require(doc, "pairs", kReq)) {
    frustum::PosePair pp;
    pp.a = frustum::io::pose_from_wire(frustum::io::require(p, "a", kReq), frustum::FrameId::X,
                                       frustum::FrameId::X, kReq);
    pp.b = frustum::io::pose_from_wire(frustum::io::require(p, "b", kReq), frustum::FrameId::H,
                                       frustum::FrameId::H, kReq);
    out.pairs.push_back(pp);
  }
  return out;
}

frustum::ExperimentConfig experiment_config(const json& j) {
  using frustum::io::get_number;
  frustum::ExperimentConfig c;
  if (!j.is_object()) throw Error(kReq, "experiment config must be an object");
  if (j.contains("noise_scales")) c.noise_scales = j.at("noise_scales").get<std::vector<double>>();
  if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("localizer")) {
    const json& l = j.at("localizer");
    if (l.contains("rot_noise_norm_deg")) {
      c.localizer.rot_noise_norm_deg = get_number(l, "rot_noise_norm_deg", kReq);
    }
    if (l.contains("trans_noise_norm_mm")) {
      c.localizer.trans_noise_norm_mm = get_number(l, "trans_noise_norm_mm", kReq);
    }
    if (l.contains("per_axis_trans")) {
      c.localizer.per_axis_trans = frustum::io::vec3(l.at("per_axis_trans"), kReq);
    }
    if (l.contains("seed")) c.localizer.seed = l.at("seed").get<std::uint64_t>();
  }
  if (j.contains("pixel_noise_sigma")) c.pixel_noise_sigma = get_number(j, "pixel_noise_sigma", kReq);
  if (j.contains("calibration_error")) {
    const json& e = j.at("calibration_error");
    if (e.contains("rot_sigma_deg")) c.calibration_error.rot_sigma_deg = get_number(e, "rot_sigma_deg", kReq);
    if (e.contains("trans_sigma_mm")) {
      c.calibration_error.trans_sigma_mm = get_number(e, "trans_sigma_mm", kReq);
    }
  }
  if (j.contains("tremor_deg")) c.tremor_deg = get_number(j, "tremor_deg", kReq);
  if (j.contains("tremor_mm")) c.tremor_mm = get_number(j, "tremor_mm", kReq);
  if (j.contains("intrinsics")) c.intrinsics = frustum::io::intrinsics_from(j.at("intrinsics"), kReq);
  if (j.contains("source_distance")) c.source_distance = get_number(j, "source_distance", kReq);
  if (j.contains("max_redraws")) c.max_redraws = j.at("max_redraws").get<int>();
  return c;
}

}  // namespace

extern "C" {

const char* frustum_version(void) { return "1.0.0"; }

const char* frustum_last_error(void) { return g_last_error.c_str(); }

const char* frustum_status_name(frustum_status status) {
  if (status == FRUSTUM_OK) return "ok";
  if (status >= FRUSTUM_E_FRAME_MISMATCH && status <= FRUSTUM_E_BAD_REQUEST) {
    return frustum::error_name(static_cast<ErrorCode>(static_cast<int>(status) - 1)).data();
  }
  return "internal";
}

const char* frustum_status_api_code(frustum_status status) {
  if (status == FRUSTUM_OK) return "ok";
  if (status >= FRUSTUM_E_FRAME_MISMATCH && status <= FRUSTUM_E_BAD_REQUEST) {
    return frustum::api_code(static_cast<ErrorCode>(static_cast<int>(status) - 1)).data();
  }
  return "bad_request";
}

void frustum_string_free(char* s) { std::free(s); }

frustum_status frustum_calibrate(const char* pairs_json, char** result_json) {
  return guarded([&] {
    require_out(result_json);
    const PairsFile file = parse_pairs(pairs_json);
    const frustum::CalibrationResult r = frustum::calibrate(file.pairs);
    json out = frustum::io::calibration(r);
    if (file.ground_truth) {
      const frustum::PoseError e = frustum::pose_error(r.x, *file.ground_truth);
      out["error"] = {{"rot_deg", e.rot_deg}, {"trans_mm", e.trans_mm}};
    }
    *result_json = dup(frustum::io::dump(out) + "\n");
  });
}

frustum_status frustum_generate_pairs(const char* request_json, char** pairs_json) {
  return guarded([&] {
    require_out(pairs_json);
    const json req = parse_json(request_json);
    if (!req.is_object()) throw Error(kReq, "request must be an object");
    frustum::RigidTransform truth = frustum::default_hand_eye();
    if (req.contains("ground_truth")) {
      truth = frustum::io::pose_from_wire(req.at("ground_truth"), frustum::FrameId::H,
                                          frustum::FrameId::X, kReq);
    }
    frustum::MotionRange range;
    range.rot_deg = req.value("rot_deg", range.rot_deg);
    range.trans_mm = req.value("trans_mm", range.trans_mm);
    frustum::NoiseModel noise;
    noise.rot_sigma_deg = req.value("rot_sigma_deg", 0.0);
    noise.trans_sigma_mm = req.value("trans_sigma_mm", 0.0);
    noise.seed = req.value("seed", std::uint64_t{0});
    const int n = req.value("n", 10);
    const auto pairs = frustum::generate_pose_pairs(truth, n, range, noise);
    json doc;
    doc["schema"] = kPairsSchema;
    doc["ground_truth"] = frustum::io::pose_wire(truth);
    json list = json::array();
    for (const auto& p : pairs) {
      list.push_back({{"a", frustum::io::pose_wire(p.a)}, {"b", frustum::io::pose_wire(p.b)}});
    }
    doc["pairs"] = list;
    *pairs_json = dup(frustum::io::dump(doc) + "\n");
  });
}

frustum_status frustum_sampling_csv(const char* pairs_json, const int* sizes, size_t n_sizes,
                                    int repeats, uint64_t seed, char** csv) {
  return guarded([&] {
    require_out(csv);
    if (!sizes && n_sizes > 0) throw Error(ErrorCode::InvalidParams, "null sizes");
    const PairsFile file = parse_pairs(pairs_json);
    frustum::SamplingOptions opt;
    opt.seed = seed;
    opt.ground_truth = file.ground_truth;
    const auto rows = frustum::sampling_experiment(
        file.pairs, std::span<const int>(sizes, n_sizes), repeats, opt);
    std::ostringstream out;
    out << "n,mean_rot_err_deg,sd_rot_err_deg,mean_trans_err_mm,sd_trans_err_mm,"
           "mean_rot_residual_deg,sd_rot_residual_deg,mean_trans_residual_mm,"
           "sd_trans_residual_mm,draws,degenerate\n";
    char buf[32];
    const auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
      return std::string(buf);
    };
    for (const auto& r : rows) {
      out << r.n << ',' << num(r.mean_rot_err) << ',' << num(r.sd_rot_err) << ','
          << num(r.mean_trans_err) << ',' << num(r.sd_trans_err) << ',' << num(r.mean_rot_residual)
          << ',' << num(r.sd_rot_residual) << ',' << num(r.mean_trans_residual) << ','
          << num(r.sd_trans_residual) << ',' << r.draws << ',' << r.degenerate << '\n';
    }
    *csv = dup(out.str());
  });
}

frustum_status frustum_run_experiment(const char* kind, const char* config_json,
                                      const char* sessions_dir, char** csv) {
  return guarded([&] {
    require_out(csv);
    const std::string k = kind ? kind : "";
    if (k != "kwire" && k != "tha") throw Error(ErrorCode::InvalidParams, "kind must be kwire or tha");
    frustum::ExperimentConfig config =
        experiment_config(config_json ? parse_json(config_json) : json::object());
    config.keep_sessions = sessions_dir != nullptr;
    const frustum::ExperimentReport report =
        k == "kwire" ? frustum::run_kwire_experiment(config) : frustum::run_tha_experiment(config);
    if (sessions_dir) {
      const std::filesystem::path dir(sessions_dir);
      std::filesystem::create_directories(dir);
      for (const auto& s : report.sessions) {
        frustum::save_session(s, (dir / (s.id + ".json")).string());
      }
    }
    *csv = dup(report.to_csv());
  });
}

frustum_status frustum_replay_file(const char* path, char** summary_json) {
  return guarded([&] {
    require_out(summary_json);
    if (!path) throw Error(ErrorCode::InvalidParams, "null path");
    const frustum::Session s = frustum::replay_file(path);
    *summary_json = dup(frustum::io::dump(frustum::session_summary(s)) + "\n");
  });
}

frustum_status frustum_triangulate(const double* origins, const double* directions, size_t n,
                                   double point[3], double* residual) {
  return guarded([&] {
    require_out(point);
    if ((!origins || !directions) && n > 0) throw Error(ErrorCode::InvalidParams, "null rays");
    std::vector<frustum::Ray> rays;
    for (size_t i = 0; i < n; ++i) {
      rays.push_back(frustum::Ray::make(frustum::Vec3(origins + 3 * i),
                                        frustum::Vec3(directions + 3 * i)));
    }
    const frustum::Triangulation t = frustum::triangulate(rays);
    for (int i = 0; i < 3; ++i) point[i] = t.point(i);
    if (residual) *residual = t.residual;
  });
}

frustum_status frustum_service_create(const char* state_dir, frustum_service** out) {
  return guarded([&] {
    require_out(out);
    std::string dir = state_dir ? state_dir : "";
    if (dir.empty()) {
      const char* env = std::getenv("FRUSTUM_STATE_DIR");
      dir = env && *env ? env : "frustum-state";
    }
    auto svc = std::make_unique<frustum_service>();
    svc->impl = std::make_unique<frustum::Service>(dir);
    *out = svc.release();
  });
}

void frustum_service_destroy(frustum_service* service) { delete service; }

frustum_status frustum_service_handle(frustum_service* service, const char* method,
                                      const char* path, const char* body, size_t body_len,
                                      int* http_status, char** content_type, char** response,
                                      size_t* response_len) {
  return guarded([&] {
    if (!service || !method || !path) throw Error(ErrorCode::InvalidParams, "null argument");
    require_out(http_status);
    require_out(response);
    const frustum::Response r = service->impl->handle(
        method, path, body ? std::string(body, body_len) : std::string());
    *http_status = r.status;
    if (content_type) *content_type = dup(r.content_type);
    *response = dup(r.body);
    if (response_len) *response_len = r.body.size();
  });
}

frustum_status frustum_service_serve(frustum_service* service, const char* host, int port) {
  return guarded([&] {
    if (!service) throw Error(ErrorCode::InvalidParams, "null service");
    service->impl->serve(host ? host : "127.0.0.1", port);
  });
}

void frustum_service_stop(frustum_service* service) {
  if (service) service->impl->stop();
}

}  // extern "C"
