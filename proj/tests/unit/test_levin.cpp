#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hintcolor/bench.hpp"
#include "hintcolor/levin.hpp"
#include "levin_oracle.hpp"

using namespace hintcolor;

namespace {

GrayImage random_gray(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(5.f, 95.f);
  GrayImage g(h, w);
  for (auto& v : g.L) v = u(rng);
  return g;
}

LocalHints random_hints(int h, int w, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> py(0, h - 1), px(0, w - 1);
  std::uniform_real_distribution<float> c(-90.f, 90.f);
  LocalHints hints(h, w);
  for (int k = 0; k < n; ++k) hints.reveal(py(rng), px(rng), c(rng), c(rng));
  return hints;
}

}  // namespace

TEST(Levin, ZeroHintsGiveGray) {
  const auto out = propagate_edits(random_gray(10, 12, 1), LocalHints(10, 12));
  EXPECT_TRUE(std::all_of(out.ab.begin(), out.ab.end(), [](float v) { return v == 0.f; }));
  EXPECT_EQ(residual(random_gray(10, 12, 1), LocalHints(10, 12), out), 0.0);
}

TEST(Levin, ConstraintsReproducedBitExactly) {
  const auto g = random_gray(24, 20, 2);
  const auto hints = random_hints(24, 20, 15, 3);
  const auto out = propagate_edits(g, hints);
  for (std::size_t i = 0; i < hints.pixels(); ++i) {
    if (hints.mask[i] == 1.f) {
      EXPECT_EQ(out.ab[2 * i], hints.ab[2 * i]);
      EXPECT_EQ(out.ab[2 * i + 1], hints.ab[2 * i + 1]);
    }
  }
}

TEST(Levin, MatchesDenseSolveOnSmallInstances) {
  LevinConfig cfg;
  cfg.solver_tol = 1e-13;
  for (int t = 0; t < 20; ++t) {
    const auto g = random_gray(8, 8, 100 + t);
    const auto hints = random_hints(8, 8, 1 + t % 6, 200 + t);
    const auto iter = propagate_edits_f64(g, hints, cfg);
    const auto dense = test_support::dense_solve(g, hints, cfg);
    for (std::size_t i = 0; i < iter.size(); ++i) ASSERT_NEAR(iter[i], dense[i], 1e-6) << "trial " << t;
  }
}

TEST(Levin, ConstantLuminanceSinglePointFillsImage) {
  GrayImage g(8, 8, 50.f);
  LocalHints hints(8, 8);
  hints.reveal(3, 4, 20.f, -60.f);
  const auto out = propagate_edits(g, hints);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    EXPECT_NEAR(out.ab[2 * i], 20.0, 1e-3);
    EXPECT_NEAR(out.ab[2 * i + 1], -60.0, 1e-3);
  }
}

TEST(Levin, AllRevealedReproducesImage) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> u(0, 255);
  RgbImage rgb(16, 16);
  for (auto& v : rgb.data) v = static_cast<std::uint8_t>(u(rng));
  const auto lab = rgb_to_lab(rgb);
  LocalHints all(16, 16);
  all.ab = lab.ab.ab;
  std::fill(all.mask.begin(), all.mask.end(), 1.f);
  const auto out = propagate_edits(lab.gray, all);
  EXPECT_EQ(out.ab, lab.ab.ab);
  EXPECT_EQ(psnr(rgb, lab_to_rgb(lab.gray, out)), kPsnrCap);
}

TEST(Levin, InvariantToLuminanceShift) {
  GrayImage g = random_gray(12, 12, 5);
  for (auto& v : g.L) v *= 0.5f;
  GrayImage shifted = g;
  for (auto& v : shifted.L) v += 25.f;
  const auto hints = random_hints(12, 12, 4, 6);
  const auto a = propagate_edits(g, hints), b = propagate_edits(shifted, hints);
  for (std::size_t i = 0; i < a.ab.size(); ++i) EXPECT_NEAR(a.ab[i], b.ab[i], 1e-3);
}

TEST(Levin, EquiluminantTwoColorsInterpolate) {
  GrayImage g(6, 16, 60.f);
  LocalHints hints(6, 16);
  hints.reveal(3, 0, 40.f, 10.f);
  hints.reveal(3, 15, -30.f, 50.f);
  const auto out = propagate_edits(g, hints);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    EXPECT_GE(out.ab[2 * i], -30.f - 1e-3f);
    EXPECT_LE(out.ab[2 * i], 40.f + 1e-3f);
    EXPECT_GE(out.ab[2 * i + 1], 10.f - 1e-3f);
    EXPECT_LE(out.ab[2 * i + 1], 50.f + 1e-3f);
  }
  EXPECT_EQ(out.at(3, 0)[0], 40.f);
  EXPECT_EQ(out.at(3, 15)[1], 50.f);
  // Columns move monotonically from one color to the other.
  EXPECT_GT(out.at(3, 4)[0], out.at(3, 11)[0]);
}

TEST(Levin, ResidualAtSolutionAndUnderPerturbation) {
  const auto g = random_gray(16, 16, 9);
  const auto hints = random_hints(16, 16, 6, 10);
  LevinConfig cfg;
  const auto out = propagate_edits(g, hints, cfg);
  const double r0 = residual(g, hints, out, cfg);
  EXPECT_LE(r0, cfg.solver_tol * residual_scale(hints));
  for (std::size_t i = 0; i < hints.pixels(); ++i) {
    if (hints.mask[i] != 1.f) continue;
    AbImage moved = out;
    moved.ab[2 * i] += 0.5f;
    EXPECT_GT(residual(g, hints, moved, cfg), r0);
  }
}

TEST(Levin, ReportsNonConvergence) {
  const auto g = random_gray(32, 32, 11);
  const auto hints = random_hints(32, 32, 3, 12);
  LevinConfig cfg;
  cfg.max_iter = 1;
  cfg.solver_tol = 1e-14;
  try {
    propagate_edits(g, hints, cfg);
    FAIL() << "expected SolverNotConverged";
  } catch (const SolverNotConverged& e) {
    EXPECT_GT(e.achieved_residual(), 0.0);
  }
}
