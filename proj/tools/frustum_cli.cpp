// Command-line front end. Talks to the library only through the C API.

#include <frustum/frustum.h>

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct Failure {
  std::string code;
  std::string message;
};

void check(frustum_status st) {
  if (st != FRUSTUM_OK) throw Failure{frustum_status_api_code(st), frustum_last_error()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{"not_found", "cannot open '" + path + "'"};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{"bad_request", "cannot write '" + out_path + "'"};
  out << text;
}

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  frustum_string_free(s);
  return out;
}

frustum_service* g_service = nullptr;

void on_signal(int) {
  if (g_service) frustum_service_stop(g_service);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flying-frustum geometry toolkit: hand-eye calibration, planning, virtual OR"};
  app.require_subcommand(1);

  std::string pairs_path, out_path, config_path, sessions_dir, replay_path, state_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<int> sizes{5, 10, 20, 40, 80, 120};
  int repeats = 100;
  std::uint64_t seed = 0;
  int n_pairs = 120;
  double rot_sigma = 0.0, trans_sigma = 0.0, rot_range = 60.0, trans_range = 100.0;

  auto* calibrate = app.add_subcommand("calibrate", "Solve AX = XB from a pose-pair file");
  calibrate->add_option("--pairs", pairs_path, "pose-pair JSON file")->required();
  calibrate->add_option("--out", out_path, "write the result here instead of stdout");

  auto* gen = app.add_subcommand("gen-pairs", "Generate synthetic pose pairs");
  gen->add_option("-n,--count", n_pairs, "number of pairs")->check(CLI::PositiveNumber);
  gen->add_option("--rot-sigma", rot_sigma, "rotation noise, degrees")->check(CLI::NonNegativeNumber);
  gen->add_option("--trans-sigma", trans_sigma, "translation noise, mm")->check(CLI::NonNegativeNumber);
  gen->add_option("--rot-range", rot_range, "max relative rotation, degrees");
  gen->add_option("--trans-range", trans_range, "max relative translation, mm");
  gen->add_option("--seed", seed, "random seed");
  gen->add_option("--out", out_path, "output file");

  auto* fig9 = app.add_subcommand("fig9", "Calibration error against the number of pairs (CSV)");
  fig9->add_option("--pairs", pairs_path, "pose-pair JSON file")->required();
  fig9->add_option("--sizes", sizes, "sample sizes")->delimiter(',');
  fig9->add_option("--repeats", repeats, "draws per size")->check(CLI::PositiveNumber);
  fig9->add_option("--seed", seed, "random seed");
  fig9->add_option("--out", out_path, "output CSV");

  std::vector<CLI::App*> experiments;
  for (const char* name : {"kwire", "tha"}) {
    auto* e = app.add_subcommand(name, std::string("Run the synthetic ") +
                                           (std::string(name) == "kwire" ? "K-wire" : "cup placement") +
                                           " experiment (CSV)");
    e->add_option("--config", config_path, "experiment config JSON");
    e->add_option("--out", out_path, "output CSV");
    e->add_option("--sessions", sessions_dir, "directory for per-repeat session files");
    experiments.push_back(e);
  }

  auto* replay = app.add_subcommand("replay", "Validate and summarize a session file");
  replay->add_option("file", replay_path, "session file")->required();

  auto* serve = app.add_subcommand("serve", "Start the HTTP session service");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(1, 65535));
  serve->add_option("--state-dir", state_dir, "session directory (default $FRUSTUM_STATE_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (calibrate->parsed()) {
      const std::string text = read_file(pairs_path);
      char* out = nullptr;
      check(frustum_calibrate(text.c_str(), &out));
      emit(take(out), out_path);
    } else if (gen->parsed()) {
      std::ostringstream req;
      req.precision(17);
      req << "{\"n\":" << n_pairs << ",\"rot_sigma_deg\":" << rot_sigma
          << ",\"trans_sigma_mm\":" << trans_sigma << ",\"rot_deg\":" << rot_range
          << ",\"trans_mm\":" << trans_range << ",\"seed\":" << seed << "}";
      char* out = nullptr;
      check(frustum_generate_pairs(req.str().c_str(), &out));
      emit(take(out), out_path);
    } else if (fig9->parsed()) {
      const std::string text = read_file(pairs_path);
      char* out = nullptr;
      check(frustum_sampling_csv(text.c_str(), sizes.data(), sizes.size(), repeats, seed, &out));
      emit(take(out), out_path);
    } else if (experiments[0]->parsed() || experiments[1]->parsed()) {
      const char* kind = experiments[0]->parsed() ? "kwire" : "tha";
      const std::string config = config_path.empty() ? "{}" : read_file(config_path);
      char* out = nullptr;
      check(frustum_run_experiment(kind, config.c_str(),
                                   sessions_dir.empty() ? nullptr : sessions_dir.c_str(), &out));
      emit(take(out), out_path);
    } else if (replay->parsed()) {
      char* out = nullptr;
      check(frustum_replay_file(replay_path.c_str(), &out));
      std::cout << take(out);
    } else if (serve->parsed()) {
      check(frustum_service_create(state_dir.empty() ? nullptr : state_dir.c_str(), &g_service));
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on http://" << host << ':' << port << std::endl;
      const frustum_status st = frustum_service_serve(g_service, host.c_str(), port);
      const std::string message = frustum_last_error();
      frustum_service_destroy(g_service);
      g_service = nullptr;
      if (st != FRUSTUM_OK) throw Failure{frustum_status_api_code(st), message};
    }
  } catch (const Failure& f) {
    std::cerr << "error [" << f.code << "]: " << f.message << '\n';
    return kDomainError;
  }
  return 0;
}
