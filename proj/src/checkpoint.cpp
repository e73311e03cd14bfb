#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hintcolor/model.hpp"

namespace hintcolor {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path sidecar(const fs::path& path, const char* suffix) {
  return fs::path(path.string() + suffix);
}

json config_to_json(const NetworkConfig& c) {
  json pairs = json::array();
  for (const auto& [e, d] : c.shortcut_pairs) pairs.push_back({e, d});
  return {{"variant", to_string(c.variant)},
          {"base_width", c.base_width},
          {"convs_per_block", c.convs_per_block},
          {"dilation", c.dilation},
          {"shortcut_pairs", pairs},
          {"use_batchnorm", c.use_batchnorm},
          {"global_layers", c.global_layers},
          {"classifier_width", c.classifier_width},
          {"Q", c.q}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.base_width = j.at("base_width").get<int>();
  c.convs_per_block = j.at("convs_per_block").get<int>();
  c.dilation = j.at("dilation").get<int>();
  c.shortcut_pairs.clear();
  for (const auto& p : j.at("shortcut_pairs")) c.shortcut_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  c.use_batchnorm = j.at("use_batchnorm").get<bool>();
  c.global_layers = j.at("global_layers").get<int>();
  c.classifier_width = j.at("classifier_width").get<int>();
  c.q = j.at("Q").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const ColorizationModel& model, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write to temporaries first so a crash never leaves a half-written checkpoint.
  const auto tmp = sidecar(path, ".tmp");
  torch::save(model.net(), tmp.string());
  json manifest = config_to_json(model.config());
  manifest["format"] = "ckpt-v1";
  manifest["gamut_hash"] = hex64(model.gamut().hash());
  manifest["config_hash"] = hex64(model.config_hash());
  manifest["step"] = model.step();
  const auto mtmp = sidecar(path, ".json.tmp");
  {
    std::ofstream out(mtmp);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + mtmp.string());
  }
  save_gamut(model.gamut(), sidecar(path, ".gamut.json"));
  fs::rename(tmp, path);
  fs::rename(mtmp, sidecar(path, ".json"));
}

std::shared_ptr<ColorizationModel> load_checkpoint(const fs::path& path, const QuantizedGamut* gamut) {
  std::ifstream in(sidecar(path, ".json"));
  if (!in) throw std::runtime_error("missing checkpoint manifest for " + path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "ckpt-v1") {
    throw std::runtime_error("unsupported checkpoint format in " + path.string());
  }
  const auto cfg = config_from_json(manifest);
  QuantizedGamut g = gamut ? *gamut : load_gamut(sidecar(path, ".gamut.json"));
  if (hex64(g.hash()) != manifest.at("gamut_hash").get<std::string>() || g.Q() != cfg.q) {
    throw ConfigMismatch("checkpoint was trained against a different gamut (Q=" + std::to_string(cfg.q) +
                         ", loaded Q=" + std::to_string(g.Q()) + ")");
  }
  ColorNet net(cfg);
  try {
    torch::load(net, path.string());
  } catch (const c10::Error& e) {
    throw ConfigMismatch("checkpoint weights do not match their manifest: " + e.msg());
  }
  auto model = std::make_shared<ColorizationModel>(net, std::move(g), manifest.value("step", std::int64_t{0}));
  if (hex64(model->config_hash()) != manifest.at("config_hash").get<std::string>()) {
    throw ConfigMismatch("checkpoint config hash mismatch");
  }
  return model;
}

}  // namespace hintcolor
