#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "hintcolor/hints.hpp"
#include "test_support.hpp"

using namespace hintcolor;

namespace {

AbImage random_ab(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-80.f, 80.f);
  AbImage ab(h, w);
  for (auto& v : ab.ab) v = u(rng);
  return ab;
}

}  // namespace

TEST(SimulateLocalHints, ZeroPoints) {
  SimConfig cfg;
  cfg.geometric_p = 1.0;
  cfg.full_reveal_prob = 0.0;
  Rng rng(3);
  const auto h = simulate_local_hints(random_ab(16, 16, 1), cfg, rng);
  EXPECT_EQ(h.revealed(), 0u);
  EXPECT_TRUE(std::all_of(h.ab.begin(), h.ab.end(), [](float v) { return v == 0.f; }));
}

TEST(SimulateLocalHints, FullRevealCopiesTarget) {
  SimConfig cfg;
  cfg.full_reveal_prob = 1.0;
  Rng rng(3);
  const auto target = random_ab(12, 20, 2);
  const auto h = simulate_local_hints(target, cfg, rng);
  EXPECT_EQ(h.revealed(), h.pixels());
  EXPECT_EQ(h.ab, target.ab);
}

TEST(SimulateLocalHints, MeanPointCountNearSeven) {
  SimConfig cfg;
  Rng rng(1234);
  double sum = 0.0;
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) {
    const int n = sample_point_count(cfg, rng);
    sum += n;
    zeros += n == 0;
  }
  EXPECT_NEAR(sum / 10000.0, 7.0, 0.35);
  EXPECT_GT(zeros, 0);
}

TEST(SimulateLocalHints, SeededReproducibility) {
  const auto target = random_ab(32, 32, 4);
  Rng a(99), b(99);
  for (int i = 0; i < 20; ++i) {
    const auto ha = simulate_local_hints(target, {}, a);
    const auto hb = simulate_local_hints(target, {}, b);
    EXPECT_EQ(ha.mask, hb.mask);
    EXPECT_EQ(ha.ab, hb.ab);
  }
}

TEST(SimulateLocalHints, FuzzedConsistency) {
  Rng rng(77);
  std::uniform_int_distribution<int> dim(1, 40);
  for (int i = 0; i < 1000; ++i) {
    const auto target = random_ab(dim(rng), dim(rng), i);
    SimConfig cfg;
    cfg.geometric_p = 0.05;
    const auto h = simulate_local_hints(target, cfg, rng);
    ASSERT_TRUE(h.consistent()) << "instance " << i;
  }
}

TEST(PatchRect, OddCenteredEvenAnchored) {
  const auto odd = patch_rect(5, 5, 3, 20, 20);
  EXPECT_EQ(odd.y0, 4);
  EXPECT_EQ(odd.y1, 7);
  const auto even = patch_rect(5, 5, 4, 20, 20);
  EXPECT_EQ(even.y0, 5);
  EXPECT_EQ(even.x1, 9);
  const auto clipped = patch_rect(0, 19, 5, 20, 20);
  EXPECT_EQ(clipped.y0, 0);
  EXPECT_EQ(clipped.y1, 3);
  EXPECT_EQ(clipped.x1, 20);
}

TEST(RevealPatchMean, ConstantRegion) {
  AbImage target(10, 10);
  for (std::size_t i = 0; i < target.pixels(); ++i) {
    target.ab[2 * i] = 12.5f;
    target.ab[2 * i + 1] = -40.f;
  }
  LocalHints h(10, 10);
  reveal_patch_mean(h, target, patch_rect(4, 4, 3, 10, 10));
  EXPECT_EQ(h.revealed(), 9u);
  for (std::size_t i = 0; i < h.pixels(); ++i) {
    if (h.mask[i] == 1.f) {
      EXPECT_EQ(h.ab[2 * i], 12.5f);
      EXPECT_EQ(h.ab[2 * i + 1], -40.f);
    }
  }
}

TEST(GlobalHints, SingleColorHistogram) {
  const auto g = load_gamut(test_support::data_dir() / "gamut_ref.json");
  RgbImage img(8, 8);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    img.data[3 * i] = 200;
    img.data[3 * i + 1] = 60;
    img.data[3 * i + 2] = 40;
  }
  const auto hints = compute_global_hints(img, g, true, true);
  const Lab lab = srgb_to_lab(200, 60, 40);
  std::vector<float> expected(g.Q());
  soft_encode_pixel(lab.a, lab.b, g, {}, expected.data());
  EXPECT_NEAR(std::accumulate(hints.histogram.begin(), hints.histogram.end(), 0.0), 1.0, 1e-5);
  for (int k = 0; k < g.Q(); ++k) EXPECT_NEAR(hints.histogram[k], expected[k], 1e-5);
  EXPECT_EQ(hints.hist_flag, 1.f);
  EXPECT_EQ(hints.sat_flag, 1.f);
  EXPECT_EQ(hints.packed().size(), static_cast<std::size_t>(g.Q() + 3));
}

TEST(GlobalHints, NothingRevealed) {
  const auto g = load_gamut(test_support::data_dir() / "gamut_ref.json");
  RgbImage img(8, 8);
  std::fill(img.data.begin(), img.data.end(), 90);
  const auto hints = compute_global_hints(img, g, false, false);
  EXPECT_TRUE(std::all_of(hints.histogram.begin(), hints.histogram.end(), [](float v) { return v == 0.f; }));
  EXPECT_EQ(hints.hist_flag, 0.f);
  EXPECT_EQ(hints.saturation, 0.f);
  EXPECT_EQ(hints.sat_flag, 0.f);
  const auto sat = compute_global_hints(img, g, false, true);
  EXPECT_EQ(sat.saturation, 0.f);
  EXPECT_EQ(sat.sat_flag, 1.f);
}

TEST(GlobalHints, InvariantToQuarterResolutionShuffle) {
  // At 4x4 the quarter-resolution image is one pixel per 4x4 block; permuting
  // whole blocks permutes quarter pixels.
  const auto g = load_gamut(test_support::data_dir() / "gamut_ref.json");
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> u(0, 255);
  RgbImage img(16, 16);
  for (int by = 0; by < 4; ++by) {
    for (int bx = 0; bx < 4; ++bx) {
      const std::uint8_t c[3] = {static_cast<std::uint8_t>(u(rng)), static_cast<std::uint8_t>(u(rng)),
                                 static_cast<std::uint8_t>(u(rng))};
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) std::copy_n(c, 3, img.at(by * 4 + y, bx * 4 + x));
      }
    }
  }
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RgbImage shuffled(16, 16);
  for (int k = 0; k < 16; ++k) {
    const int sy = (perm[k] / 4) * 4, sx = (perm[k] % 4) * 4, dy = (k / 4) * 4, dx = (k % 4) * 4;
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) std::copy_n(img.at(sy + y, sx + x), 3, shuffled.at(dy + y, dx + x));
    }
  }
  // Bilinear downsampling by exactly 4 averages the two central rows and
  // columns of each block, which are interior to it, so blocks stay separate.
  const auto a = compute_global_hints(img, g, true, false);
  const auto b = compute_global_hints(shuffled, g, true, false);
  for (int k = 0; k < g.Q(); ++k) EXPECT_NEAR(a.histogram[k], b.histogram[k], 1e-6);
}

TEST(SimulateGlobalHints, RevealsEachStatisticHalfTheTime) {
  GlobalHints full;
  full.histogram = {0.25f, 0.75f};
  full.hist_flag = 1.f;
  full.saturation = 0.4f;
  full.sat_flag = 1.f;
  Rng rng(5);
  int hist = 0, sat = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto g = simulate_global_hints(full, rng);
    hist += g.hist_flag == 1.f;
    sat += g.sat_flag == 1.f;
    if (g.hist_flag == 0.f) {
      ASSERT_EQ(g.histogram[0] + g.histogram[1], 0.f);
    }
    if (g.sat_flag == 0.f) {
      ASSERT_EQ(g.saturation, 0.f);
    }
  }
  EXPECT_NEAR(hist / 4000.0, 0.5, 0.03);
  EXPECT_NEAR(sat / 4000.0, 0.5, 0.03);
}

TEST(HintsFromEdits, EmptyGrayAndOverlap) {
  EXPECT_EQ(hints_from_edits({}, 8, 8).revealed(), 0u);

  const auto gray = hints_from_edits({{3, 3, 0.f, 0.f, 3}}, 8, 8);
  EXPECT_EQ(gray.revealed(), 9u);
  EXPECT_TRUE(gray.consistent());

  const auto two = hints_from_edits({{2, 2, 10.f, 10.f, 3}, {3, 3, -20.f, 30.f, 3}}, 8, 8);
  const auto i = static_cast<std::size_t>(3) * 8 + 3;
  EXPECT_EQ(two.ab[2 * i], -20.f);
  EXPECT_EQ(two.ab[2 * i + 1], 30.f);
  const auto j = static_cast<std::size_t>(1) * 8 + 1;
  EXPECT_EQ(two.ab[2 * j], 10.f);
}

TEST(HintsFromEdits, OutOfBoundsNamesIndex) {
  try {
    hints_from_edits({{1, 1, 0.f, 0.f, 3}, {-1, 5, 0.f, 0.f, 3}}, 8, 8);
    FAIL() << "expected EditOutOfBounds";
  } catch (const EditOutOfBounds& e) {
    EXPECT_EQ(e.index(), 1u);
  }
  EXPECT_THROW(hints_from_edits({{8, 0, 0.f, 0.f, 3}}, 8, 8), EditOutOfBounds);
  EXPECT_THROW(hints_from_edits({{0, 0, 120.f, 0.f, 3}}, 8, 8), EditOutOfBounds);
}

TEST(EditsJson, RoundTripAndDefaultSize) {
  const std::vector<PointEdit> edits{{1, 2, 3.5f, -4.f, 5}, {7, 8, 0.f, 0.f, 1}};
  EXPECT_EQ(edits_from_json(edits_to_json(edits)), edits);
  const auto parsed = edits_from_json(R"([{"x":1,"y":2,"a":3,"b":4}])");
  EXPECT_EQ(parsed.at(0).size, 3);
  EXPECT_THROW(edits_from_json("{}"), std::invalid_argument);
}
