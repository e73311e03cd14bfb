#include "hintcolor/service.hpp"

#include <array>
#include <cmath>
#include <random>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace hintcolor {

using nlohmann::json;

namespace {

HttpResult error(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

HttpResult edit_error(const EditOutOfBounds& e) {
  return {422, json{{"error", e.what()}, {"index", e.index()}}.dump()};
}

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::vector<PointEdit> parse_edits(const json& arr) {
  if (!arr.is_array()) throw std::invalid_argument("edits must be a JSON array");
  return edits_from_json(arr.dump());
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) | static_cast<unsigned char>(bytes[i + 2]);
    out += {kB64[(v >> 18) & 63], kB64[(v >> 12) & 63], kB64[(v >> 6) & 63], kB64[v & 63]};
  }
  if (i < bytes.size()) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kB64[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

// Accepts both the standard and the URL-safe alphabet, padding optional.
std::string base64_decode(const std::string& text) {
  std::array<int, 256> table;
  table.fill(-1);
  for (int i = 0; i < 64; ++i) table[static_cast<unsigned char>(kB64[i])] = i;
  table['-'] = 62;
  table['_'] = 63;
  std::string out;
  unsigned acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = table[static_cast<unsigned char>(c)];
    if (v < 0) throw std::invalid_argument("invalid base64");
    acc = (acc << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xff);
    }
  }
  return out;
}

std::string new_session_id() {
  static std::random_device rd;
  static std::mutex m;
  std::lock_guard lock(m);
  std::string id;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(rd()));
    id += buf;
  }
  return id;
}

ColorizationService::ColorizationService(ServiceConfig cfg, std::shared_ptr<const ColorizationModel> local,
                                         std::shared_ptr<const ColorizationModel> global)
    : cfg_(std::move(cfg)), local_(std::move(local)), global_(std::move(global)) {
  if (!local_ || local_->config().variant != Variant::kLocal) {
    throw ConfigMismatch("service needs a local-hints checkpoint");
  }
  if (global_ && global_->config().variant != Variant::kGlobal) {
    throw ConfigMismatch("--global-ckpt is not a global-hints checkpoint");
  }
}

std::shared_ptr<ColorizationService::Session> ColorizationService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  const auto now = std::chrono::steady_clock::now();
  if (now - it->second->last_used > cfg_.session_ttl) {
    sessions_.erase(it);
    return nullptr;
  }
  it->second->last_used = now;
  return it->second;
}

std::string ColorizationService::render(const Session& s, const AbImage& work_ab) const {
  const AbImage ab = (work_ab.height == s.gray.height && work_ab.width == s.gray.width)
                         ? work_ab
                         : resize_ab(work_ab, s.gray.height, s.gray.width);
  const auto png = encode_png(lab_to_rgb(s.gray, ab));
  return base64_encode(std::string(png.begin(), png.end()));
}

LocalHints ColorizationService::work_hints(const Session& s, const std::vector<PointEdit>& edits) const {
  validate_edits(edits, s.gray.height, s.gray.width);
  const double sy = static_cast<double>(s.work_gray.height) / s.gray.height;
  const double sx = static_cast<double>(s.work_gray.width) / s.gray.width;
  std::vector<PointEdit> scaled = edits;
  for (auto& e : scaled) {
    e.x = std::min(s.work_gray.width - 1, static_cast<int>(std::floor(e.x * sx)));
    e.y = std::min(s.work_gray.height - 1, static_cast<int>(std::floor(e.y * sy)));
    e.size = std::max(1, static_cast<int>(std::lround(e.size * std::max(sx, sy))));
  }
  return hints_from_edits(scaled, s.work_gray.height, s.work_gray.width);
}

HttpResult ColorizationService::create_session(const std::string& image_bytes) {
  if (image_bytes.size() > cfg_.max_upload_bytes) return error(413, "upload exceeds the size limit");
  RgbImage rgb;
  try {
    rgb = decode_image(std::vector<std::uint8_t>(image_bytes.begin(), image_bytes.end()));
  } catch (const std::exception&) {
    return error(415, "upload is not a decodable image");
  }
  if (std::max(rgb.height, rgb.width) > cfg_.max_side) {
    return error(413, "image side exceeds " + std::to_string(cfg_.max_side));
  }
  auto s = std::make_shared<Session>();
  s->gray = rgb_to_lab(rgb).gray;
  const int long_side = std::max(rgb.height, rgb.width);
  if (long_side > cfg_.working_side) {
    const double f = static_cast<double>(cfg_.working_side) / long_side;
    s->work_gray = resize_gray(s->gray, std::max(1, static_cast<int>(std::lround(rgb.height * f))),
                               std::max(1, static_cast<int>(std::lround(rgb.width * f))));
  } else {
    s->work_gray = s->gray;
  }
  s->last_used = std::chrono::steady_clock::now();
  const std::string png = render(*s, local_->forward_local(s->work_gray, LocalHints(s->work_gray.height,
                                                                                     s->work_gray.width)));
  const std::string id = new_session_id();
  {
    std::lock_guard lock(mutex_);
    sessions_[id] = s;
  }
  return {200, json{{"session_id", id}, {"width", rgb.width}, {"height", rgb.height}, {"auto_png_base64", png}}
                   .dump()};
}

HttpResult ColorizationService::colorize(const std::string& id, const std::string& body) {
  auto s = find(id);
  if (!s) return error(404, "unknown session");
  std::vector<PointEdit> edits;
  try {
    const json j = body.empty() ? json::object() : json::parse(body);
    if (j.contains("edits")) edits = parse_edits(j.at("edits"));
  } catch (const std::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }
  try {
    const LocalHints hints = work_hints(*s, edits);
    return {200, json{{"png_base64", render(*s, local_->forward_local(s->work_gray, hints))}}.dump()};
  } catch (const EditOutOfBounds& e) {
    return edit_error(e);
  }
}

HttpResult ColorizationService::palette(const std::string& id, int x, int y, const std::string& edits_text) {
  auto s = find(id);
  if (!s) return error(404, "unknown session");
  if (x < 0 || y < 0 || x >= s->gray.width || y >= s->gray.height) {
    return error(422, "query pixel outside the image");
  }
  std::vector<PointEdit> edits;
  try {
    if (!edits_text.empty()) {
      const bool raw = edits_text.front() == '[' || edits_text.front() == '{';
      const json j = json::parse(raw ? edits_text : base64_decode(edits_text));
      edits = parse_edits(j.is_object() ? j.at("edits") : j);
    }
  } catch (const std::exception& e) {
    return error(400, std::string("malformed edits: ") + e.what());
  }
  std::shared_ptr<const ColorDistribution> dist;
  try {
    const LocalHints hints = work_hints(*s, edits);
    const std::string key = edits_to_json(edits);
    std::lock_guard lock(s->cache_mutex);
    if (!s->cached_dist || s->cached_edits != key) {
      s->cached_dist = std::make_shared<ColorDistribution>(local_->forward_distribution(s->work_gray, hints));
      s->cached_edits = key;
    }
    dist = s->cached_dist;
  } catch (const EditOutOfBounds& e) {
    return edit_error(e);
  }
  const double L = s->gray.at(y, x);
  const auto suggestion =
      suggest_colors(*dist, PixelQuery{y, x, s->gray.height, s->gray.width}, L, local_->gamut(), cfg_.palette);
  return {200, "{\"suggestions\":" + suggestion_to_json(suggestion, L, "rgb_hex") + "}"};
}

HttpResult ColorizationService::run_global(const std::string& id, const GlobalHints& hints) {
  auto s = find(id);
  if (!s) return error(404, "unknown session");
  return {200, json{{"png_base64", render(*s, global_->forward_global(s->work_gray, hints))}}.dump()};
}

HttpResult ColorizationService::global_from_reference(const std::string& id, const std::string& image_bytes,
                                                      bool use_hist, bool use_sat) {
  if (!global_) return error(409, "no global-hints checkpoint configured");
  if (!find(id)) return error(404, "unknown session");
  if (image_bytes.size() > cfg_.max_upload_bytes) return error(413, "upload exceeds the size limit");
  RgbImage ref;
  try {
    ref = decode_image(std::vector<std::uint8_t>(image_bytes.begin(), image_bytes.end()));
  } catch (const std::exception&) {
    return error(415, "reference is not a decodable image");
  }
  return run_global(id, compute_global_hints(ref, global_->gamut(), use_hist, use_sat));
}

HttpResult ColorizationService::global_from_json(const std::string& id, const std::string& body) {
  if (!global_) return error(409, "no global-hints checkpoint configured");
  if (!find(id)) return error(404, "unknown session");
  GlobalHints g;
  g.histogram.assign(global_->gamut().Q(), 0.f);
  try {
    const json j = json::parse(body);
    bool use_hist = j.contains("histogram"), use_sat = j.contains("saturation");
    if (j.contains("flags")) {
      const auto& f = j.at("flags");
      use_hist = f.at("histogram").get<bool>();
      use_sat = f.at("saturation").get<bool>();
    }
    if (use_hist) {
      const auto h = j.at("histogram").get<std::vector<float>>();
      if (static_cast<int>(h.size()) != global_->gamut().Q()) {
        return error(422, "histogram must have " + std::to_string(global_->gamut().Q()) + " entries");
      }
      double sum = 0.0;
      for (float v : h) {
        if (!(v >= 0.f)) return error(422, "histogram entries must be nonnegative");
        sum += v;
      }
      if (!(sum > 0.0)) return error(422, "histogram is empty");
      for (int k = 0; k < global_->gamut().Q(); ++k) g.histogram[k] = static_cast<float>(h[k] / sum);
      g.hist_flag = 1.f;
    }
    if (use_sat) {
      const double v = j.at("saturation").get<double>();
      if (!(v >= 0.0 && v <= 1.0)) return error(422, "saturation must be in [0,1]");
      g.saturation = static_cast<float>(v);
      g.sat_flag = 1.f;
    }
  } catch (const std::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }
  return run_global(id, g);
}

HttpResult ColorizationService::healthz() const {
  json j{{"status", "ok"}, {"checkpoint_hash", hex64(local_->config_hash())}};
  if (global_) j["global_checkpoint_hash"] = hex64(global_->config_hash());
  return {200, j.dump()};
}

std::size_t ColorizationService::purge_expired() {
  std::lock_guard lock(mutex_);
  const auto now = std::chrono::steady_clock::now();
  return std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_used > cfg_.session_ttl; });
}

std::size_t ColorizationService::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void ColorizationService::bind(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.set_payload_max_length(cfg_.max_upload_bytes + (1u << 20));
  server.Post("/v1/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
    purge_expired();
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) return reply(res, error(415, "multipart field 'image' missing"));
      return reply(res, create_session(req.get_file_value("image").content));
    }
    reply(res, create_session(req.body));
  });
  server.Post(R"(/v1/sessions/([0-9a-f]+)/colorize)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, colorize(req.matches[1], req.body));
  });
  server.Get(R"(/v1/sessions/([0-9a-f]+)/palette)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    int x = 0, y = 0;
    try {
      x = std::stoi(req.get_param_value("x"));
      y = std::stoi(req.get_param_value("y"));
    } catch (const std::exception&) {
      return reply(res, error(400, "x and y query parameters are required integers"));
    }
    reply(res, palette(req.matches[1], x, y, req.get_param_value("edits")));
  });
  server.Post(R"(/v1/sessions/([0-9a-f]+)/global)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    if (req.is_multipart_form_data()) {
      if (!req.has_file("reference")) return reply(res, error(415, "multipart field 'reference' missing"));
      auto flag = [&](const char* key) {
        return !req.has_file(key) || req.get_file_value(key).content != "0";
      };
      return reply(res, global_from_reference(req.matches[1], req.get_file_value("reference").content,
                                              flag("histogram"), flag("saturation")));
    }
    reply(res, global_from_json(req.matches[1], req.body));
  });
  server.Get("/v1/healthz", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, healthz()); });
}

int run_server(ColorizationService& service) {
  httplib::Server server;
  service.bind(server);
  if (!server.listen(service.config().host, service.config().port)) return 1;
  return 0;
}

}  // namespace hintcolor
