#include "hintcolor/palette.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace hintcolor {
namespace {

constexpr double kSliceTolerance = 1e-6;

struct Point {
  double a, b, w;
};

struct Cluster {
  double a = 0.0, b = 0.0, w = 0.0;
};

double dist2(double a0, double b0, double a1, double b1) {
  return (a0 - a1) * (a0 - a1) + (b0 - b1) * (b0 - b1);
}

// Weighted Lloyd iterations from the given seeds. Returns distortion.
double lloyd(const std::vector<Point>& pts, std::vector<Cluster>& clusters) {
  std::vector<int> assign(pts.size(), -1);
  for (int iter = 0; iter < 200; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const double d = dist2(pts[i].a, pts[i].b, clusters[c].a, clusters[c].b);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<Cluster> next(clusters.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto& c = next[assign[i]];
      c.a += pts[i].w * pts[i].a;
      c.b += pts[i].w * pts[i].b;
      c.w += pts[i].w;
    }
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (next[c].w > 0.0) {
        clusters[c] = {next[c].a / next[c].w, next[c].b / next[c].w, next[c].w};
      } else {
        clusters[c].w = 0.0;
      }
    }
    if (!changed && iter > 0) break;
  }
  double distortion = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    distortion += pts[i].w * dist2(pts[i].a, pts[i].b, clusters[assign[i]].a, clusters[assign[i]].b);
  }
  return distortion;
}

// Farthest-point seeding restricted to the heaviest bins.
std::vector<Cluster> seed_clusters(const std::vector<Point>& pts, const std::vector<std::size_t>& by_weight,
                                   std::size_t first, std::size_t k) {
  const std::size_t pool = std::min(pts.size(), std::max<std::size_t>(3 * k, 16));
  std::vector<Cluster> seeds{{pts[first].a, pts[first].b, 0.0}};
  while (seeds.size() < k) {
    std::size_t best = by_weight[0];
    double bd = -1.0;
    for (std::size_t r = 0; r < pool; ++r) {
      const auto& p = pts[by_weight[r]];
      double d = std::numeric_limits<double>::infinity();
      for (const auto& s : seeds) d = std::min(d, dist2(p.a, p.b, s.a, s.b));
      if (d > bd) {
        bd = d;
        best = by_weight[r];
      }
    }
    if (bd <= 0.0) break;
    seeds.push_back({pts[best].a, pts[best].b, 0.0});
  }
  return seeds;
}

void merge_close(std::vector<Cluster>& clusters, double radius) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < clusters.size() && !merged; ++j) {
        if (dist2(clusters[i].a, clusters[i].b, clusters[j].a, clusters[j].b) < radius * radius) {
          const double w = clusters[i].w + clusters[j].w;
          clusters[i] = {(clusters[i].a * clusters[i].w + clusters[j].a * clusters[j].w) / w,
                         (clusters[i].b * clusters[i].w + clusters[j].b * clusters[j].w) / w, w};
          clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
        }
      }
    }
  }
}

}  // namespace

bool in_srgb_gamut(double L, double a, double b) {
  const auto c = lab_to_srgb_unclipped({L, a, b});
  return std::all_of(c.begin(), c.end(), [](double v) {
    return v >= -kSliceTolerance && v <= 1.0 + kSliceTolerance;
  });
}

std::vector<std::array<double, 2>> gamut_slice(double L, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("gamut_slice: resolution must be positive");
  if (L < 0.0 || L > 100.0) throw std::invalid_argument("gamut_slice: L outside [0,100]");
  std::vector<std::array<double, 2>> out;
  const int n = static_cast<int>(std::floor(110.0 / resolution));
  for (int i = -n; i <= n; ++i) {
    for (int j = -n; j <= n; ++j) {
      const double a = i * resolution, b = j * resolution;
      if (in_srgb_gamut(L, a, b)) out.push_back({a, b});
    }
  }
  return out;
}

std::array<double, 2> nearest_in_slice(double L, double a, double b) {
  if (in_srgb_gamut(L, a, b)) return {a, b};
  std::array<double, 2> best{0.0, 0.0};
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& p : gamut_slice(std::clamp(L, 0.0, 100.0), 1.0)) {
    const double d = dist2(a, b, p[0], p[1]);
    if (d < bd) {
      bd = d;
      best = p;
    }
  }
  return best;
}

std::string rgb_hex(double L, double a, double b) {
  const auto c = lab_to_srgb8({L, a, b});
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

PaletteSuggestion suggest_colors(const float* probs, double L_at_pixel, const QuantizedGamut& gamut,
                                 const PaletteConfig& cfg) {
  if (cfg.K < 1 || !(cfg.temperature > 0.0 && cfg.temperature <= 1.0)) {
    throw std::invalid_argument("invalid palette config");
  }
  const int q = gamut.Q();
  std::vector<Point> pts;
  double total = 0.0;
  for (int k = 0; k < q; ++k) {
    if (!std::isfinite(probs[k]) || probs[k] < 0.f) {
      throw std::invalid_argument("distribution row is not a valid probability vector");
    }
    if (probs[k] <= 0.f) continue;
    const double w = std::pow(static_cast<double>(probs[k]), cfg.temperature);
    pts.push_back({gamut.centers[k][0], gamut.centers[k][1], w});
    total += w;
  }
  if (pts.empty() || !(total > 0.0)) {
    throw std::invalid_argument("empty distribution row: invalid model output");
  }
  for (auto& p : pts) p.w /= total;

  std::vector<std::size_t> by_weight(pts.size());
  std::iota(by_weight.begin(), by_weight.end(), 0);
  std::stable_sort(by_weight.begin(), by_weight.end(), [&](std::size_t x, std::size_t y) {
    if (pts[x].w != pts[y].w) return pts[x].w > pts[y].w;
    return dist2(pts[x].a, pts[x].b, 0, 0) < dist2(pts[y].a, pts[y].b, 0, 0);
  });

  const std::size_t k = std::min<std::size_t>(cfg.K, pts.size());
  std::vector<Cluster> best;
  double best_distortion = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(cfg.seed);
  std::discrete_distribution<std::size_t> pick(
      pts.size(), 0.0, 1.0, [&, i = std::size_t{0}](double) mutable { return pts[i++].w; });
  for (int r = 0; r < std::max(1, cfg.kmeans_restarts); ++r) {
    const std::size_t first = r == 0 ? by_weight[0] : pick(rng);
    auto clusters = seed_clusters(pts, by_weight, first, k);
    const double d = lloyd(pts, clusters);
    if (d < best_distortion - 1e-12) {
      best_distortion = d;
      best = std::move(clusters);
    }
  }
  std::erase_if(best, [](const Cluster& c) { return c.w <= 0.0; });
  merge_close(best, cfg.merge_radius);

  PaletteSuggestion out;
  double mass = 0.0;
  for (const auto& c : best) mass += c.w;
  for (const auto& c : best) {
    const auto ab = nearest_in_slice(L_at_pixel, c.a, c.b);
    out.entries.push_back({ab[0], ab[1], c.w / mass});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const PaletteEntry& x, const PaletteEntry& y) {
                     if (x.weight != y.weight) return x.weight > y.weight;
                     return x.a * x.a + x.b * x.b < y.a * y.a + y.b * y.b;
                   });
  return out;
}

PaletteSuggestion suggest_colors(const ColorDistribution& dist, const PixelQuery& pixel,
                                 double L_at_pixel, const QuantizedGamut& gamut,
                                 const PaletteConfig& cfg) {
  if (dist.bins != gamut.Q()) throw std::invalid_argument("distribution and gamut Q differ");
  if (pixel.image_height <= 0 || pixel.image_width <= 0 || pixel.y < 0 || pixel.x < 0 ||
      pixel.y >= pixel.image_height || pixel.x >= pixel.image_width) {
    throw std::out_of_range("palette query outside the image");
  }
  const int cy = std::min(dist.height - 1,
                          static_cast<int>(static_cast<long long>(pixel.y) * dist.height / pixel.image_height));
  const int cx = std::min(dist.width - 1,
                          static_cast<int>(static_cast<long long>(pixel.x) * dist.width / pixel.image_width));
  return suggest_colors(dist.row(cy, cx), L_at_pixel, gamut, cfg);
}

std::string suggestion_to_json(const PaletteSuggestion& s, double L, const std::string& hex_key) {
  auto arr = nlohmann::json::array();
  for (const auto& e : s.entries) {
    arr.push_back({{"a", e.a}, {"b", e.b}, {"weight", e.weight}, {hex_key, rgb_hex(L, e.a, e.b)}});
  }
  return arr.dump();
}

}  // namespace hintcolor
