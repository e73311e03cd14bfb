#include "hintcolor/hints.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace hintcolor {

std::size_t LocalHints::revealed() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1.f));
}

bool LocalHints::consistent() const {
  if (mask.size() != static_cast<std::size_t>(height) * width || ab.size() != mask.size() * 2) {
    return false;
  }
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0.f && mask[i] != 1.f) return false;
    if (mask[i] == 0.f && (ab[2 * i] != 0.f || ab[2 * i + 1] != 0.f)) return false;
    if (std::abs(ab[2 * i]) > 110.f || std::abs(ab[2 * i + 1]) > 110.f) return false;
  }
  return true;
}

std::vector<float> GlobalHints::packed() const {
  std::vector<float> v(histogram);
  v.push_back(hist_flag);
  v.push_back(saturation);
  v.push_back(sat_flag);
  return v;
}

PatchRect patch_rect(int cy, int cx, int size, int height, int width) {
  const int lo = (size % 2 == 1) ? size / 2 : 0;
  PatchRect r{cy - lo, cx - lo, cy - lo + size, cx - lo + size};
  r.y0 = std::max(r.y0, 0);
  r.x0 = std::max(r.x0, 0);
  r.y1 = std::min(r.y1, height);
  r.x1 = std::min(r.x1, width);
  return r;
}

std::array<float, 2> patch_mean(const AbImage& target, const PatchRect& r) {
  double a = 0.0, b = 0.0;
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      a += target.at(y, x)[0];
      b += target.at(y, x)[1];
    }
  }
  const double n = static_cast<double>(r.y1 - r.y0) * (r.x1 - r.x0);
  return {static_cast<float>(a / n), static_cast<float>(b / n)};
}

void reveal_patch_mean(LocalHints& hints, const AbImage& target, const PatchRect& r) {
  if (r.empty()) return;
  const auto m = patch_mean(target, r);
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) hints.reveal(y, x, m[0], m[1]);
  }
}

int sample_point_count(const SimConfig& cfg, Rng& rng) {
  return std::geometric_distribution<int>(cfg.geometric_p)(rng);
}

LocalHints simulate_local_hints(const AbImage& target, const SimConfig& cfg, Rng& rng) {
  if (!(cfg.geometric_p > 0.0 && cfg.geometric_p <= 1.0) || cfg.patch_min < 1 ||
      cfg.patch_min > cfg.patch_max) {
    throw std::invalid_argument("invalid hint simulation config");
  }
  LocalHints hints(target.height, target.width);
  std::bernoulli_distribution full(cfg.full_reveal_prob);
  if (full(rng)) {
    hints.ab = target.ab;
    std::fill(hints.mask.begin(), hints.mask.end(), 1.f);
    return hints;
  }
  const int n = sample_point_count(cfg, rng);
  const double h = target.height, w = target.width;
  std::normal_distribution<double> gy(h / 2.0, h / 4.0);
  std::normal_distribution<double> gx(w / 2.0, w / 4.0);
  std::uniform_int_distribution<int> size(cfg.patch_min, cfg.patch_max);
  for (int k = 0; k < n; ++k) {
    const int cy = std::clamp(static_cast<int>(std::lround(gy(rng))), 0, target.height - 1);
    const int cx = std::clamp(static_cast<int>(std::lround(gx(rng))), 0, target.width - 1);
    reveal_patch_mean(hints, target, patch_rect(cy, cx, size(rng), target.height, target.width));
  }
  return hints;
}

GlobalHints compute_global_hints(const LabImage& lab, const RgbImage& rgb,
                                 const QuantizedGamut& gamut, bool reveal_hist, bool reveal_sat) {
  GlobalHints g;
  g.histogram.assign(gamut.Q(), 0.f);
  if (reveal_hist) {
    const int qh = std::max(1, (lab.ab.height + 3) / 4);
    const int qw = std::max(1, (lab.ab.width + 3) / 4);
    const AbImage small = resize_ab(lab.ab, qh, qw);
    std::vector<double> acc(gamut.Q(), 0.0);
    std::vector<float> row(gamut.Q());
    for (std::size_t i = 0; i < small.pixels(); ++i) {
      soft_encode_pixel(small.ab[2 * i], small.ab[2 * i + 1], gamut, {}, row.data());
      for (int k = 0; k < gamut.Q(); ++k) acc[k] += row[k];
    }
    for (int k = 0; k < gamut.Q(); ++k) {
      g.histogram[k] = static_cast<float>(acc[k] / static_cast<double>(small.pixels()));
    }
    g.hist_flag = 1.f;
  }
  if (reveal_sat) {
    g.saturation = static_cast<float>(mean_saturation(rgb));
    g.sat_flag = 1.f;
  }
  return g;
}

GlobalHints compute_global_hints(const RgbImage& rgb, const QuantizedGamut& gamut, bool reveal_hist,
                                 bool reveal_sat) {
  return compute_global_hints(rgb_to_lab(rgb), rgb, gamut, reveal_hist, reveal_sat);
}

GlobalHints simulate_global_hints(const GlobalHints& full, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  GlobalHints g = full;
  if (!coin(rng)) {
    std::fill(g.histogram.begin(), g.histogram.end(), 0.f);
    g.hist_flag = 0.f;
  }
  if (!coin(rng)) {
    g.saturation = 0.f;
    g.sat_flag = 0.f;
  }
  return g;
}

void validate_edits(const std::vector<PointEdit>& edits, int height, int width) {
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const auto& e = edits[i];
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) {
      throw EditOutOfBounds(i, "edit " + std::to_string(i) + " at (" + std::to_string(e.x) + ", " +
                                   std::to_string(e.y) + ") is outside the " +
                                   std::to_string(width) + "x" + std::to_string(height) + " image");
    }
    if (e.size < 1) {
      throw EditOutOfBounds(i, "edit " + std::to_string(i) + " has non-positive size");
    }
    if (!(std::abs(e.a) <= 110.f) || !(std::abs(e.b) <= 110.f)) {
      throw EditOutOfBounds(i, "edit " + std::to_string(i) + " color outside [-110,110]");
    }
  }
}

LocalHints hints_from_edits(const std::vector<PointEdit>& edits, int height, int width) {
  validate_edits(edits, height, width);
  LocalHints hints(height, width);
  for (const auto& e : edits) {
    const PatchRect r = patch_rect(e.y, e.x, e.size, height, width);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) hints.reveal(y, x, e.a, e.b);
    }
  }
  return hints;
}

std::string edits_to_json(const std::vector<PointEdit>& edits) {
  auto arr = nlohmann::json::array();
  for (const auto& e : edits) {
    arr.push_back({{"x", e.x}, {"y", e.y}, {"a", e.a}, {"b", e.b}, {"size", e.size}});
  }
  return arr.dump();
}

std::vector<PointEdit> edits_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_array()) throw std::invalid_argument("edit list must be a JSON array");
  std::vector<PointEdit> out;
  for (const auto& item : j) {
    PointEdit e;
    e.x = item.at("x").get<int>();
    e.y = item.at("y").get<int>();
    e.a = item.at("a").get<float>();
    e.b = item.at("b").get<float>();
    e.size = item.value("size", 3);
    out.push_back(e);
  }
  return out;
}

}  // namespace hintcolor
