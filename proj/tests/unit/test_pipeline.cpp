#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "hintcolor/dataset.hpp"
#include "hintcolor/evaluate.hpp"
#include "hintcolor/synthetic.hpp"
#include "hintcolor/train.hpp"
#include "test_support.hpp"

using namespace hintcolor;
namespace fs = std::filesystem;

namespace {

const QuantizedGamut& gamut() {
  static const QuantizedGamut g = load_gamut(test_support::data_dir() / "gamut_ref.json");
  return g;
}

std::vector<TrainingImage> scenes(int count, int side, std::uint64_t seed) {
  std::vector<TrainingImage> out;
  SceneOptions o;
  o.height = o.width = side;
  for (int i = 0; i < count; ++i) {
    RgbImage rgb = generate_scene(seed + i, o);
    LabImage lab = rgb_to_lab(rgb);
    out.push_back({std::move(rgb), std::move(lab)});
  }
  return out;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.image_size = 32;
  c.batch_size = 2;
  c.steps = 10;
  c.lr = 1e-3;
  c.base_width = 4;
  c.seed = 5;
  return c;
}

std::vector<torch::Tensor> snapshot(ColorNet& net) {
  std::vector<torch::Tensor> out;
  for (auto& p : net->parameters()) out.push_back(p.detach().clone());
  for (auto& b : net->buffers()) out.push_back(b.detach().clone());
  return out;
}

bool same(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!torch::equal(a[i], b[i])) return false;
  }
  return true;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST(Ingest, SplitsAreStableAndProportional) {
  const auto dir = test_support::scratch("ingest_split");
  write_synthetic_dataset(dir, 100, 11, {64, 64, 1, 2});
  const auto a = ingest_dataset(dir);
  EXPECT_EQ(a.count(Split::kTrain), 80u);
  EXPECT_EQ(a.count(Split::kVal), 10u);
  EXPECT_EQ(a.count(Split::kTest), 10u);
  const auto b = ingest_dataset(dir);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].file, b.entries[i].file);
    EXPECT_EQ(a.entries[i].split, b.entries[i].split);
  }
  EXPECT_EQ(a.content_hash, b.content_hash);

  const auto path = dir / "manifest.json";
  save_manifest(a, path);
  const auto c = load_manifest(path);
  EXPECT_EQ(c.content_hash, a.content_hash);
  EXPECT_EQ(c.files(Split::kTest), a.files(Split::kTest));
  EXPECT_EQ(open_dataset(path).count(Split::kVal), 10u);
}

TEST(Ingest, SkipsCorruptSmallAndGrayscale) {
  const auto dir = test_support::scratch("ingest_skip");
  write_synthetic_dataset(dir, 20, 12, {64, 64, 1, 2});
  write_bytes(dir / "bad1.png", "not an image");
  write_bytes(dir / "bad2.jpg", std::string(100, '\xff'));
  write_bytes(dir / "bad3.png", "\x89PNG\r\n\x1a\n truncated");
  RgbImage gray(80, 80);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<std::uint8_t>((i / 3) % 200);
  write_png(gray, dir / "gray.png");
  SceneOptions small{32, 32, 1, 1};
  write_png(generate_scene(1, small), dir / "small.png");
  const auto m = ingest_dataset(dir);
  EXPECT_EQ(m.entries.size(), 20u);
  EXPECT_EQ(m.skipped.size(), 5u);
  for (const auto& e : m.entries) EXPECT_EQ(e.file.rfind("scene_", 0), 0u) << e.file;
}

TEST(Ingest, HashTracksContent) {
  const auto dir = test_support::scratch("ingest_hash");
  write_synthetic_dataset(dir, 5, 13, {64, 64, 1, 2});
  const auto before = ingest_dataset(dir).content_hash;
  write_png(generate_scene(999, {64, 64, 1, 2}), dir / "scene_00000.png");
  EXPECT_NE(ingest_dataset(dir).content_hash, before);
}

TEST(Ingest, RejectsUnusableDirectories) {
  const auto empty = test_support::scratch("ingest_empty");
  EXPECT_THROW(ingest_dataset(empty), std::runtime_error);
  const auto gray = test_support::scratch("ingest_gray");
  write_png(RgbImage(70, 70), gray / "a.png");
  EXPECT_THROW(ingest_dataset(gray), std::runtime_error);
  EXPECT_THROW(ingest_dataset(gray / "missing"), std::runtime_error);
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
  TrainConfig c = tiny_config();
  c.variant = Variant::kGlobal;
  c.sim.geometric_p = 0.25;
  c.loss.delta = 2.0;
  c.out = "x.pt";
  const auto d = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(train_config_to_json(d), train_config_to_json(c));
  EXPECT_EQ(d.variant, Variant::kGlobal);
  EXPECT_DOUBLE_EQ(d.sim.geometric_p, 0.25);
  EXPECT_THROW(train_config_from_json(R"({"learning_rate": 0.1})"), std::invalid_argument);
  EXPECT_THROW(train_config_from_json(R"({"batch_size": 0})"), std::invalid_argument);
}

TEST(Training, BatchesDependOnlyOnSeedAndStep) {
  const auto images = scenes(4, 48, 20);
  const auto cfg = tiny_config();
  const auto a = make_batch(images, cfg, gamut(), 3);
  const auto b = make_batch(images, cfg, gamut(), 3);
  const auto c = make_batch(images, cfg, gamut(), 4);
  EXPECT_TRUE(torch::equal(a.input, b.input));
  EXPECT_TRUE(torch::equal(a.dist, b.dist));
  EXPECT_FALSE(torch::equal(a.input, c.input));
  EXPECT_TRUE(torch::allclose(a.dist.sum(1), torch::ones({2, 8, 8}), 1e-5, 1e-5));
}

TEST(Training, SideOnlyStepLeavesMainBranchUntouched) {
  const auto images = scenes(4, 48, 21);
  const auto cfg = tiny_config();
  torch::manual_seed(1);
  ColorNet net(cfg.network(gamut().Q()));
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(1e-2));
  std::vector<torch::Tensor> main_before, side_before;
  for (auto& p : net->main_parameters()) main_before.push_back(p.detach().clone());
  for (auto& p : net->side_parameters()) side_before.push_back(p.detach().clone());
  train_step(net, opt, make_batch(images, cfg, gamut(), 0), cfg, 0.0);
  auto main_after = net->main_parameters();
  for (std::size_t i = 0; i < main_after.size(); ++i) EXPECT_TRUE(torch::equal(main_after[i], main_before[i]));
  bool side_moved = false;
  auto side_after = net->side_parameters();
  for (std::size_t i = 0; i < side_after.size(); ++i) side_moved |= !torch::equal(side_after[i], side_before[i]);
  EXPECT_TRUE(side_moved);
}

TEST(Training, SeededRunsAreReproducible) {
  const auto images = scenes(4, 48, 22);
  const auto cfg = tiny_config();
  const auto a = train(images, cfg, gamut());
  const auto b = train(images, cfg, gamut());
  ASSERT_EQ(a.trace.size(), 10u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].huber, b.trace[i].huber);
    EXPECT_EQ(a.trace[i].ce, b.trace[i].ce);
  }
  EXPECT_TRUE(same(snapshot(a.model->net()), snapshot(b.model->net())));
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  const auto images = scenes(4, 48, 23);
  const auto dir = test_support::scratch("resume");
  auto cfg = tiny_config();
  const auto full = train(images, cfg, gamut());

  cfg.out = (dir / "part.pt").string();
  cfg.checkpoint_every = 5;
  struct Stop {};
  try {
    train(images, cfg, gamut(), [](std::int64_t step, const StepLosses&) {
      if (step == 5) throw Stop{};
    });
    FAIL() << "interruption did not happen";
  } catch (const Stop&) {
  }
  EXPECT_EQ(load_checkpoint(cfg.out)->step(), 5);

  auto resumed_cfg = tiny_config();
  resumed_cfg.resume = cfg.out;
  const auto resumed = train(images, resumed_cfg, gamut());
  EXPECT_EQ(resumed.trace.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(resumed.trace[i].huber, full.trace[5 + i].huber);
  EXPECT_TRUE(same(snapshot(resumed.model->net()), snapshot(full.model->net())));

  auto other = tiny_config();
  other.base_width = 8;
  other.resume = cfg.out;
  EXPECT_THROW(train(images, other, gamut()), ConfigMismatch);
}

TEST(Training, NonFiniteLossStopsWithLastGoodCheckpoint) {
  auto images = scenes(2, 48, 24);
  for (auto& img : images) std::fill(img.lab.gray.L.begin(), img.lab.gray.L.end(), std::nanf(""));
  const auto dir = test_support::scratch("diverge");
  auto cfg = tiny_config();
  cfg.out = (dir / "m.pt").string();
  try {
    train(images, cfg, gamut());
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_EQ(e.last_good(), cfg.out);
    EXPECT_TRUE(fs::exists(cfg.out));
  }
}

TEST(Training, CosineScheduleEndpoints) {
  auto cfg = tiny_config();
  EXPECT_DOUBLE_EQ(cosine_lr(cfg, 0), cfg.lr);
  EXPECT_NEAR(cosine_lr(cfg, cfg.steps - 1), cfg.lr * cfg.lr_final_fraction, 1e-15);
}

TEST(Evaluate, ModesAndVariantChecks) {
  NetworkConfig nc;
  nc.base_width = 4;
  const ColorizationModel local(nc, gamut(), 1);
  nc.variant = Variant::kGlobal;
  const ColorizationModel global(nc, gamut(), 1);
  const RgbImage rgb = generate_scene(3, {40, 40, 1, 2});
  EXPECT_EQ(colorize_for_mode(local, rgb, EvalMode::kAuto).height, 40);
  EXPECT_EQ(colorize_for_mode(global, rgb, EvalMode::kGlobalHist).width, 40);
  EXPECT_THROW(colorize_for_mode(local, rgb, EvalMode::kGlobalSat), ConfigMismatch);
  EXPECT_THROW(colorize_for_mode(global, rgb, EvalMode::kGtColors), ConfigMismatch);
  EXPECT_THROW(eval_mode_from_string("oracle"), std::invalid_argument);
  for (auto m : {EvalMode::kAuto, EvalMode::kGtColors, EvalMode::kGlobalHist, EvalMode::kGlobalSat}) {
    EXPECT_EQ(eval_mode_from_string(to_string(m)), m);
  }
  const auto summary = evaluate({{"a", rgb}, {"b", generate_scene(4, {40, 40, 1, 2})}}, local, EvalMode::kGtColors);
  EXPECT_EQ(summary.psnrs.size(), 2u);
  EXPECT_GT(summary.psnr_mean, 0.0);
}
