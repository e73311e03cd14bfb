#include "hintcolor/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <vector>

namespace hintcolor {

namespace {

struct Shape {
  bool ellipse;
  double cy, cx, ry, rx;
  double L, a, b;
  double stripe_freq, stripe_amp, stripe_angle;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

RgbImage generate_scene(std::uint64_t seed, const SceneOptions& opts) {
  std::mt19937_64 rng(seed);
  const int H = opts.height, W = opts.width;
  const double chroma = uniform(rng, 0.15, 1.0);

  const double horizon = uniform(rng, 0.3, 0.7) * H;
  const double slope = uniform(rng, -0.2, 0.2);
  const bool sunset = uniform(rng, 0.0, 1.0) < 0.25;
  const double sky_a = sunset ? uniform(rng, 10, 30) : uniform(rng, -10, 5);
  const double sky_b = sunset ? uniform(rng, 20, 50) : uniform(rng, -45, -15);
  const bool grass = uniform(rng, 0.0, 1.0) < 0.6;
  const double ground_a = grass ? uniform(rng, -40, -15) : uniform(rng, 5, 20);
  const double ground_b = grass ? uniform(rng, 20, 45) : uniform(rng, 15, 40);
  const double ground_L = uniform(rng, 35, 60);

  std::vector<Shape> shapes;
  const int n = std::uniform_int_distribution<int>(opts.min_objects, opts.max_objects)(rng);
  for (int k = 0; k < n; ++k) {
    Shape s;
    s.ellipse = uniform(rng, 0.0, 1.0) < 0.5;
    s.cy = uniform(rng, 0.1, 0.9) * H;
    s.cx = uniform(rng, 0.1, 0.9) * W;
    s.ry = uniform(rng, 0.06, 0.22) * H;
    s.rx = uniform(rng, 0.06, 0.22) * W;
    // Round objects lean warm so shape carries some color information.
    const double hue = s.ellipse ? uniform(rng, -0.3, 1.6) : uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double c = uniform(rng, 25, 70);
    s.a = c * std::cos(hue);
    s.b = c * std::sin(hue);
    s.L = uniform(rng, 30, 85);
    s.stripe_freq = uniform(rng, 0.15, 0.6);
    s.stripe_amp = uniform(rng, 0.0, 1.0) < 0.5 ? uniform(rng, 3, 10) : 0.0;
    s.stripe_angle = uniform(rng, 0.0, std::numbers::pi);
    shapes.push_back(s);
  }

  std::normal_distribution<double> noise(0.0, 1.5);
  RgbImage out(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double h = horizon + slope * (x - W / 2.0);
      double L, a, b;
      if (y < h) {
        const double t = std::clamp(y / std::max(h, 1.0), 0.0, 1.0);
        L = 72 + 18 * t;
        a = sky_a * (1.0 - 0.4 * t);
        b = sky_b * (1.0 - 0.4 * t);
      } else {
        L = ground_L + 4.0 * std::sin(0.35 * x + 0.2 * y) + 3.0 * std::sin(0.9 * y);
        a = ground_a;
        b = ground_b;
      }
      for (const auto& s : shapes) {
        const double dy = (y - s.cy) / s.ry, dx = (x - s.cx) / s.rx;
        const bool inside = s.ellipse ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        const double u = x * std::cos(s.stripe_angle) + y * std::sin(s.stripe_angle);
        L = s.L + s.stripe_amp * std::sin(s.stripe_freq * u);
        a = s.a;
        b = s.b;
      }
      L = std::clamp(L + noise(rng), 0.0, 100.0);
      const auto c = lab_to_srgb8({L, a * chroma, b * chroma});
      std::copy(c.begin(), c.end(), out.at(y, x));
    }
  }
  return out;
}

void write_synthetic_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed,
                             const SceneOptions& opts) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05d.png", i);
    write_png(generate_scene(seed * 1000003ULL + static_cast<std::uint64_t>(i), opts), dir / name);
  }
}

}  // namespace hintcolor
