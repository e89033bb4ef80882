#pragma once

// Session service: routes JSON requests onto durable session files. Used by
// the C API both in-process (handle) and over HTTP (serve).

#include "json_io.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace frustum {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class Service {
 public:
  explicit Service(std::filesystem::path state_dir);
  ~Service();

  Response handle(const std::string& method, const std::string& path, const std::string& body);
  void serve(const std::string& host, int port);
  void stop();

  const std::filesystem::path& state_dir() const { return dir_; }

 private:
  std::filesystem::path session_path(const std::string& id) const;
  Session load(const std::string& id) const;
  void store(const Session& s) const;
  std::mutex& writer(const std::string& id);

  io::json create(const io::json& req);
  Response route(const std::string& method, const std::vector<std::string>& parts,
                 const std::string& body);

  std::filesystem::path dir_;
  std::mutex registry_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> writers_;
  std::mutex server_mutex_;
  std::unique_ptr<httplib::Server> server_;
};

// JSON summary of a session, shared by the CLI replay command.
io::json session_summary(const Session& s);

// Error payload {"code", "message", "detail"}.
io::json error_body(ErrorCode code, const std::string& message);
int http_status(ErrorCode code);

}  // namespace frustum
