#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hintcolor/losses.hpp"
#include "hintcolor/model.hpp"
#include "test_support.hpp"

using namespace hintcolor;

namespace {

const QuantizedGamut& gamut() {
  static const QuantizedGamut g = load_gamut(test_support::data_dir() / "gamut_ref.json");
  return g;
}

NetworkConfig tiny(Variant v = Variant::kLocal) {
  NetworkConfig c;
  c.variant = v;
  c.base_width = 4;
  return c;
}

GrayImage random_gray(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 100.f);
  GrayImage g(h, w);
  for (auto& v : g.L) v = u(rng);
  return g;
}

LocalHints some_hints(int h, int w) {
  return hints_from_edits({{w / 3, h / 3, 40.f, -20.f, 5}, {w / 2, h / 2, -30.f, 60.f, 3}}, h, w);
}

// Nudges BatchNorm running statistics away from their initial values so that
// inference-mode tests exercise stored statistics.
void warm_up(ColorizationModel& m) {
  auto& net = m.net();
  net->train();
  torch::NoGradGuard g;
  const int ch = net->config().variant == Variant::kLocal ? 4 : 1;
  for (int i = 0; i < 3; ++i) {
    auto global = net->config().variant == Variant::kGlobal ? torch::rand({2, m.gamut().Q() + 3}) : torch::Tensor();
    net->forward(torch::randn({2, ch, 32, 32}), global, false);
  }
  net->eval();
}

}  // namespace

TEST(NetworkConfig, WidthsAndValidation) {
  NetworkConfig c;
  EXPECT_EQ(c.widths(), (std::array<int, 10>{32, 64, 128, 256, 256, 256, 256, 128, 64, 32}));
  c.shortcut_pairs = {{1, 9}};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  NetworkConfig d;
  EXPECT_NE(d.hash(), tiny().hash());
}

TEST(Model, OutputShapeAndRange) {
  ColorizationModel m(tiny(), gamut(), 1);
  for (auto [h, w] : {std::pair{64, 64}, {64, 96}, {30, 45}}) {
    const auto out = m.forward_local(random_gray(h, w, 2), some_hints(h, w));
    ASSERT_EQ(out.height, h);
    ASSERT_EQ(out.width, w);
    for (float v : out.ab) ASSERT_LE(std::abs(v), 110.f);
  }
}

TEST(Model, InferenceIsDeterministic) {
  ColorizationModel m(tiny(), gamut(), 3);
  warm_up(m);
  const auto g = random_gray(40, 56, 4);
  const auto h = some_hints(40, 56);
  EXPECT_EQ(m.forward_local(g, h).ab, m.forward_local(g, h).ab);
}

TEST(Model, DistributionShapeAndSimplex) {
  ColorizationModel m(tiny(), gamut(), 5);
  for (auto [h, w] : {std::pair{64, 64}, {30, 45}}) {
    const auto d = m.forward_distribution(random_gray(h, w, 6), some_hints(h, w));
    EXPECT_EQ(d.height, (h + 3) / 4);
    EXPECT_EQ(d.width, (w + 3) / 4);
    EXPECT_EQ(d.bins, gamut().Q());
    for (std::size_t i = 0; i < d.pixels(); ++i) {
      double s = 0.0;
      for (int k = 0; k < d.bins; ++k) s += d.probs[i * d.bins + k];
      ASSERT_NEAR(s, 1.0, 1e-5);
    }
  }
}

TEST(Model, SideLossDoesNotReachMainBranch) {
  torch::manual_seed(0);
  ColorNet net(tiny());
  net->train();
  auto input = torch::randn({2, 4, 32, 32});
  auto out = net->forward(input, {}, true);
  auto target = torch::softmax(torch::randn_like(out.logits), 1);
  cross_entropy_from_logits(out.logits, target).sum().backward();
  for (auto& p : net->main_parameters()) {
    EXPECT_TRUE(!p.grad().defined() || p.grad().abs().max().item<float>() == 0.f);
  }
  bool side_moved = false;
  for (auto& p : net->side_parameters()) side_moved |= p.grad().defined() && p.grad().abs().max().item<float>() > 0.f;
  EXPECT_TRUE(side_moved);
}

TEST(Model, BoundedReceptiveField) {
  ColorizationModel m(tiny(), gamut(), 7);
  warm_up(m);
  const int S = 320;
  auto g = random_gray(S, S, 8);
  const LocalHints none(S, S);
  const auto a = m.forward_local(g, none);
  g.at(20, 20) = 100.f - g.at(20, 20);
  const auto b = m.forward_local(g, none);
  // Analytic bound on the receptive-field radius for this architecture is
  // below 140 pixels; allow slack for subsample/upsample alignment.
  bool near_changed = false;
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const bool changed = a.at(y, x)[0] != b.at(y, x)[0] || a.at(y, x)[1] != b.at(y, x)[1];
      if (std::max(std::abs(y - 20), std::abs(x - 20)) > 160) {
        ASSERT_FALSE(changed) << y << "," << x;
      } else {
        near_changed |= changed;
      }
    }
  }
  EXPECT_TRUE(near_changed);
}

TEST(Model, InferenceIndependentOfBatchComposition) {
  torch::manual_seed(2);
  ColorNet net(tiny());
  net->train();
  {
    torch::NoGradGuard g;
    for (int i = 0; i < 3; ++i) net->forward(torch::randn({4, 4, 32, 32}));
  }
  net->eval();
  torch::NoGradGuard g;
  auto x = torch::randn({3, 4, 32, 32});
  auto batched = net->forward(x).ab;
  for (int i = 0; i < 3; ++i) {
    auto single = net->forward(x.slice(0, i, i + 1)).ab;
    EXPECT_TRUE(torch::allclose(single, batched.slice(0, i, i + 1), 1e-5, 1e-4));
  }
}

TEST(Model, GlobalVariantZeroedSlots) {
  ColorizationModel m(tiny(Variant::kGlobal), gamut(), 9);
  warm_up(m);
  const auto g = random_gray(32, 48, 10);
  GlobalHints a, b;
  a.histogram.assign(gamut().Q(), 0.f);
  b.histogram.assign(gamut().Q(), 0.f);
  b.histogram[3] = 0.7f;
  b.saturation = 0.4f;
  EXPECT_EQ(m.forward_global(g, a).ab, m.forward_global(g, b).ab);
  b.hist_flag = 1.f;
  EXPECT_NE(m.forward_global(g, a).ab, m.forward_global(g, b).ab);
  EXPECT_THROW(m.forward_local(g, LocalHints(32, 48)), ConfigMismatch);
}

TEST(Model, InputValidation) {
  ColorizationModel m(tiny(), gamut(), 1);
  EXPECT_THROW(m.forward_local(random_gray(16, 16, 1), LocalHints(16, 17)), std::invalid_argument);
  EXPECT_THROW(m.forward_global(random_gray(16, 16, 1), GlobalHints{}), ConfigMismatch);
}

TEST(Checkpoint, RoundTripReproducesInference) {
  ColorizationModel m(tiny(), gamut(), 11);
  warm_up(m);
  m.set_step(42);
  const auto dir = test_support::scratch("ckpt_roundtrip");
  save_checkpoint(m, dir / "model.pt");
  const auto loaded = load_checkpoint(dir / "model.pt");
  EXPECT_EQ(loaded->step(), 42);
  EXPECT_EQ(loaded->config_hash(), m.config_hash());
  const auto g = random_gray(40, 40, 12);
  const auto h = some_hints(40, 40);
  EXPECT_EQ(loaded->forward_local(g, h).ab, m.forward_local(g, h).ab);
  EXPECT_EQ(loaded->forward_distribution(g, h).probs, m.forward_distribution(g, h).probs);
}

TEST(Checkpoint, GlobalVariantRoundTrip) {
  ColorizationModel m(tiny(Variant::kGlobal), gamut(), 12);
  warm_up(m);
  const auto dir = test_support::scratch("ckpt_global");
  save_checkpoint(m, dir / "global.pt");
  const auto loaded = load_checkpoint(dir / "global.pt");
  EXPECT_EQ(loaded->config().variant, Variant::kGlobal);
  GlobalHints h;
  h.histogram.assign(gamut().Q(), 0.f);
  h.histogram[5] = 1.f;
  h.hist_flag = 1.f;
  const auto g = random_gray(24, 32, 14);
  EXPECT_EQ(loaded->forward_global(g, h).ab, m.forward_global(g, h).ab);
}

TEST(Checkpoint, GamutMismatchRejected) {
  ColorizationModel m(tiny(), gamut(), 13);
  const auto dir = test_support::scratch("ckpt_mismatch");
  save_checkpoint(m, dir / "model.pt");
  const auto other = build_gamut();
  EXPECT_THROW(load_checkpoint(dir / "model.pt", &other), ConfigMismatch);
  EXPECT_THROW(load_checkpoint(dir / "missing.pt"), std::runtime_error);
}
