#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "hintcolor/model.hpp"
#include "hintcolor/palette.hpp"

namespace httplib {
class Server;
}

namespace hintcolor {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_upload_bytes = 32u << 20;
  int max_side = 2048;
  // Long side of the resolution inference runs at; larger uploads are
  // downscaled and the predicted ab upsampled back.
  int working_side = 256;
  std::chrono::seconds session_ttl{3600};
  PaletteConfig palette;
};

// Status code plus JSON body. Errors carry {"error": ..., "index"?: ...}.
struct HttpResult {
  int status = 200;
  std::string body;
};

class ColorizationService {
 public:
  ColorizationService(ServiceConfig cfg, std::shared_ptr<const ColorizationModel> local,
                      std::shared_ptr<const ColorizationModel> global = nullptr);

  HttpResult create_session(const std::string& image_bytes);
  /// `body` is {"edits": [{x, y, a, b, size}, ...]}.
  HttpResult colorize(const std::string& id, const std::string& body);
  /// `edits` is the JSON edit array (URL-decoded), or empty.
  HttpResult palette(const std::string& id, int x, int y, const std::string& edits);
  /// Either a reference image or a JSON body {histogram, saturation, flags:{histogram, saturation}}.
  HttpResult global_from_reference(const std::string& id, const std::string& image_bytes, bool use_hist,
                                   bool use_sat);
  HttpResult global_from_json(const std::string& id, const std::string& body);
  HttpResult healthz() const;

  /// Drops sessions idle for longer than the TTL. Returns how many were dropped.
  std::size_t purge_expired();
  std::size_t session_count() const;

  /// Registers the /v1 routes.
  void bind(httplib::Server& server);

  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Session {
    GrayImage gray;       // original resolution
    GrayImage work_gray;  // working resolution
    std::chrono::steady_clock::time_point last_used;
    std::mutex cache_mutex;
    std::string cached_edits;
    std::shared_ptr<const ColorDistribution> cached_dist;
  };

  std::shared_ptr<Session> find(const std::string& id);
  std::string render(const Session& s, const AbImage& work_ab) const;
  LocalHints work_hints(const Session& s, const std::vector<PointEdit>& edits) const;
  HttpResult run_global(const std::string& id, const GlobalHints& hints);

  ServiceConfig cfg_;
  std::shared_ptr<const ColorizationModel> local_;
  std::shared_ptr<const ColorizationModel> global_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

/// Random 128-bit session token, hex encoded.
std::string new_session_id();

/// Blocks serving on cfg.host:cfg.port until the process is stopped.
int run_server(ColorizationService& service);

}  // namespace hintcolor
