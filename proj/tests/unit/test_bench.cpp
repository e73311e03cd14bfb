#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "hintcolor/bench.hpp"
#include "hintcolor/levin.hpp"
#include "hintcolor/synthetic.hpp"
#include "test_support.hpp"

using namespace hintcolor;

namespace {

std::vector<BenchImage> scenes(int n, int size) {
  std::vector<BenchImage> out;
  SceneOptions opts;
  opts.height = opts.width = size;
  for (int i = 0; i < n; ++i) out.push_back({"scene" + std::to_string(i), generate_scene(500 + i, opts)});
  return out;
}

Colorizer levin() {
  return [](const GrayImage& g, const LocalHints& h) { return propagate_edits(g, h); };
}

}  // namespace

TEST(Psnr, ClosedForms) {
  RgbImage a(2, 2), b(2, 2);
  std::fill(a.data.begin(), a.data.end(), 100);
  b = a;
  EXPECT_EQ(psnr(a, b), 99.0);
  std::fill(b.data.begin(), b.data.end(), 116);
  EXPECT_NEAR(psnr(a, b), 20.0 * std::log10(255.0 / 16.0), 1e-9);
  // Squared errors 0,0,...,48 over 12 values: MSE 4.
  b = a;
  b.data[0] = 100 + 4;
  b.data[1] = 100 + 4;
  b.data[2] = 100 + 4;
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(255.0 * 255.0 / 4.0), 1e-9);
  EXPECT_THROW(psnr(a, RgbImage(2, 3)), std::invalid_argument);
}

TEST(RandomSampler, EmptyConstantAndSeeded) {
  AbImage target(20, 20);
  for (std::size_t i = 0; i < target.pixels(); ++i) {
    target.ab[2 * i] = 33.f;
    target.ab[2 * i + 1] = -7.f;
  }
  Rng rng(1);
  EXPECT_EQ(sample_random_points(target, 0, 7, rng).revealed(), 0u);
  const auto one = sample_random_points(target, 1, 7, rng);
  EXPECT_EQ(one.revealed(), 49u);
  for (std::size_t i = 0; i < one.pixels(); ++i) {
    if (one.mask[i] == 1.f) {
      EXPECT_EQ(one.ab[2 * i], 33.f);
    }
  }
  Rng a(42), b(42);
  EXPECT_EQ(sample_random_points(target, 10, 7, a).mask, sample_random_points(target, 10, 7, b).mask);
}

TEST(MaxErrorSampler, PicksWorstRegion) {
  // Everything is gray except a red square; the gray colorizer gets only the square wrong.
  AbImage target(60, 60);
  for (int y = 40; y < 52; ++y) {
    for (int x = 8; x < 20; ++x) target.at(y, x)[0] = 60.f;
  }
  for (int window : {1, 25}) {
    BenchConfig cfg;
    cfg.error_window = window;
    const auto hints = sample_max_error_points(target, GrayImage(60, 60, 50.f), gray_colorizer(), 1, cfg);
    ASSERT_EQ(hints.revealed(), 49u);
    // The patch lies within reach of the averaging window around the square.
    const int reach = window / 2 + 3;
    for (int y = 0; y < 60; ++y) {
      for (int x = 0; x < 60; ++x) {
        if (hints.mask[y * 60 + x] == 1.f) {
          EXPECT_TRUE(y >= 40 - reach && y < 52 + reach && x >= 8 - reach && x < 20 + reach) << window;
        }
      }
    }
  }
}

TEST(MaxErrorSampler, PatchesNeverOverlap) {
  const auto img = scenes(1, 64)[0];
  const auto lab = rgb_to_lab(img.rgb);
  BenchConfig cfg;
  const auto r = sample_max_error_points(lab.ab, lab.gray, levin(), std::vector<int>{1, 5, 20}, cfg);
  ASSERT_FALSE(r.short_count);
  for (std::size_t k = 0; k < 3; ++k) {
    // Full-fit, non-overlapping patches: revealed area is exactly n * 49.
    EXPECT_EQ(r.hints[k].revealed(), static_cast<std::size_t>(r.achieved[k]) * 49u);
  }
  // Nested: the 5-point mask contains the 1-point mask.
  for (std::size_t i = 0; i < r.hints[0].pixels(); ++i) {
    if (r.hints[0].mask[i] == 1.f) {
      EXPECT_EQ(r.hints[1].mask[i], 1.f);
    }
  }
}

TEST(MaxErrorSampler, ShortCountFlagged) {
  // 20 < 7 * sqrt(9): at most 4 disjoint 7x7 patches fit in 20x20.
  AbImage target(20, 20);
  for (std::size_t i = 0; i < target.pixels(); ++i) target.ab[2 * i] = static_cast<float>(i % 50);
  bool short_count = false;
  int achieved = -1;
  BenchConfig cfg;
  sample_max_error_points(target, GrayImage(20, 20, 50.f), gray_colorizer(), 9, cfg, &short_count, &achieved);
  EXPECT_TRUE(short_count);
  EXPECT_LT(achieved, 9);
  EXPECT_GE(achieved, 1);
}

TEST(Benchmark, GrayConstantInN) {
  BenchConfig cfg;
  cfg.point_counts = {0, 1, 5, 20};
  const auto report = run_benchmark(scenes(3, 48), cfg, {{"gray", gray_colorizer()}});
  for (const auto& sampler : {"random", "max_error"}) {
    const double base = report.find("gray", sampler, 0)->psnr_mean;
    for (int n : cfg.point_counts) {
      EXPECT_EQ(report.find("gray", sampler, n)->psnr_mean, base);
      EXPECT_EQ(report.find("gray", sampler, n)->images, 3);
    }
  }
}

TEST(Benchmark, CsvMatchesGoldenFile) {
  BenchConfig cfg;
  cfg.point_counts = {0, 2, 10};
  cfg.seed = 3;
  cfg.methods = {"gray", "levin"};
  const auto report = run_benchmark(scenes(2, 40), cfg, {{"gray", gray_colorizer()}, {"levin", levin()}});
  const auto path = std::filesystem::path(HINTCOLOR_TEST_GOLDEN_DIR) / "bench_small.csv";
  if (std::getenv("HINTCOLOR_UPDATE_GOLDEN")) std::ofstream(path) << report.to_csv();
  std::ifstream in(path);
  ASSERT_TRUE(in) << "golden file missing";
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(report.to_csv(), golden.str());
  EXPECT_EQ(report.to_csv().substr(0, report.to_csv().find('\n')), kBenchCsvHeader);
}

TEST(Benchmark, SeededReproducibility) {
  BenchConfig cfg;
  cfg.point_counts = {0, 3, 8};
  cfg.methods = {"levin"};
  cfg.seed = 11;
  const auto images = scenes(2, 40);
  const std::map<std::string, Colorizer> m{{"levin", levin()}};
  const auto a = run_benchmark(images, cfg, m).to_csv();
  EXPECT_EQ(a, run_benchmark(images, cfg, m).to_csv());
  cfg.seed = 12;
  EXPECT_NE(a, run_benchmark(images, cfg, m).to_csv());
}

TEST(Benchmark, LevinImprovesWithPoints) {
  BenchConfig cfg;
  cfg.point_counts = {0, 5, 20};
  cfg.methods = {"levin"};
  const auto report = run_benchmark(scenes(4, 48), cfg, {{"levin", levin()}});
  for (const auto& sampler : {"random", "max_error"}) {
    EXPECT_GE(report.find("levin", sampler, 20)->psnr_mean, report.find("levin", sampler, 0)->psnr_mean);
  }
  EXPECT_GE(report.find("levin", "max_error", 20)->psnr_mean,
            report.find("levin", "random", 20)->psnr_mean - report.find("levin", "random", 20)->psnr_stderr);
}

TEST(Benchmark, Errors) {
  BenchConfig cfg;
  cfg.methods = {"network_local"};
  EXPECT_THROW(run_benchmark(scenes(1, 32), cfg, {{"gray", gray_colorizer()}}), std::invalid_argument);
  cfg.methods = {"gray"};
  EXPECT_THROW(run_benchmark({}, cfg, {{"gray", gray_colorizer()}}), std::invalid_argument);
  cfg.point_counts = {5, 1};
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg.point_counts = {1};
  cfg.reveal_patch = 6;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
}

TEST(MeanStderr, Basic) {
  const auto [m, se] = mean_stderr({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(se, std::sqrt(1.6666666666666667 / 4.0), 1e-12);
}
