#include "hintcolor/train.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hintcolor {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef HINTCOLOR_DATA_DIR
#define HINTCOLOR_DATA_DIR "data"
#endif

fs::path data_dir() {
  if (const char* env = std::getenv("HINTCOLOR_DATA_DIR")) return env;
  return HINTCOLOR_DATA_DIR;
}

QuantizedGamut resolve_gamut(const std::string& path) {
  return load_gamut(path.empty() ? data_dir() / "gamut_ref.json" : fs::path(path));
}

NetworkConfig TrainConfig::network(int q) const {
  NetworkConfig n;
  n.variant = variant;
  n.base_width = base_width;
  n.convs_per_block = convs_per_block;
  n.use_batchnorm = use_batchnorm;
  n.q = q;
  return n;
}

void TrainConfig::validate() const {
  if (image_size < 8 || image_size % 8 != 0) throw std::invalid_argument("image_size must be a positive multiple of 8");
  if (batch_size < 1 || steps < 0) throw std::invalid_argument("batch_size and steps must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(sim.geometric_p > 0.0 && sim.geometric_p <= 1.0)) throw std::invalid_argument("geometric_p must be in (0,1]");
  if (sim.patch_min < 1 || sim.patch_min > sim.patch_max) throw std::invalid_argument("invalid patch size range");
  if (!(loss.delta > 0.0)) throw std::invalid_argument("huber_delta must be positive");
  if (checkpoint_every < 0 || max_images < 0) throw std::invalid_argument("negative count in config");
}

namespace {

const std::set<std::string> kKeys{
    "variant", "image_size", "batch_size", "steps", "lr", "lr_final_fraction", "flip",
    "geometric_p", "full_reveal_prob", "patch_min", "patch_max", "huber_delta",
    "side_branch_weight", "checkpoint_every", "seed", "max_images", "base_width",
    "convs_per_block", "use_batchnorm", "out", "gamut", "log", "resume", "threads"};

template <typename T>
void read(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!kKeys.count(k)) throw std::invalid_argument("unknown train config key: " + k);
  }
  TrainConfig c;
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  read(j, "image_size", c.image_size);
  read(j, "batch_size", c.batch_size);
  read(j, "steps", c.steps);
  read(j, "lr", c.lr);
  read(j, "lr_final_fraction", c.lr_final_fraction);
  read(j, "flip", c.flip);
  read(j, "geometric_p", c.sim.geometric_p);
  read(j, "full_reveal_prob", c.sim.full_reveal_prob);
  read(j, "patch_min", c.sim.patch_min);
  read(j, "patch_max", c.sim.patch_max);
  read(j, "huber_delta", c.loss.delta);
  read(j, "side_branch_weight", c.side_branch_weight);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "seed", c.seed);
  read(j, "max_images", c.max_images);
  read(j, "base_width", c.base_width);
  read(j, "convs_per_block", c.convs_per_block);
  read(j, "use_batchnorm", c.use_batchnorm);
  read(j, "out", c.out);
  read(j, "gamut", c.gamut);
  read(j, "log", c.log);
  read(j, "resume", c.resume);
  read(j, "threads", c.threads);
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j{{"variant", to_string(c.variant)},
         {"image_size", c.image_size},
         {"batch_size", c.batch_size},
         {"steps", c.steps},
         {"lr", c.lr},
         {"lr_final_fraction", c.lr_final_fraction},
         {"flip", c.flip},
         {"geometric_p", c.sim.geometric_p},
         {"full_reveal_prob", c.sim.full_reveal_prob},
         {"patch_min", c.sim.patch_min},
         {"patch_max", c.sim.patch_max},
         {"huber_delta", c.loss.delta},
         {"side_branch_weight", c.side_branch_weight},
         {"checkpoint_every", c.checkpoint_every},
         {"seed", c.seed},
         {"max_images", c.max_images},
         {"base_width", c.base_width},
         {"convs_per_block", c.convs_per_block},
         {"use_batchnorm", c.use_batchnorm},
         {"out", c.out},
         {"gamut", c.gamut},
         {"log", c.log},
         {"resume", c.resume},
         {"threads", c.threads}};
  return j.dump(2);
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

std::vector<TrainingImage> load_split(const DatasetManifest& m, Split split, int max_images, int min_side) {
  std::vector<TrainingImage> out;
  for (const auto& path : m.files(split)) {
    if (max_images > 0 && static_cast<int>(out.size()) >= max_images) break;
    RgbImage rgb = read_image(path);
    const int short_side = std::min(rgb.height, rgb.width);
    if (short_side < min_side) {
      const double s = static_cast<double>(min_side) / short_side;
      rgb = resize_rgb(rgb, std::max(min_side, static_cast<int>(std::ceil(rgb.height * s))),
                       std::max(min_side, static_cast<int>(std::ceil(rgb.width * s))));
    }
    LabImage lab = rgb_to_lab(rgb);
    out.push_back({std::move(rgb), std::move(lab)});
  }
  return out;
}

namespace {

struct Crop {
  RgbImage rgb;
  LabImage lab;
};

Crop crop(const TrainingImage& img, int y0, int x0, int size, bool flip) {
  Crop c{RgbImage(size, size), {GrayImage(size, size), AbImage(size, size)}};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int sx = x0 + (flip ? size - 1 - x : x);
      const int sy = y0 + y;
      std::copy_n(img.rgb.at(sy, sx), 3, c.rgb.at(y, x));
      c.lab.gray.at(y, x) = img.lab.gray.at(sy, sx);
      std::copy_n(img.lab.ab.at(sy, sx), 2, c.lab.ab.at(y, x));
    }
  }
  return c;
}

}  // namespace

TrainBatch make_batch(const std::vector<TrainingImage>& images, const TrainConfig& cfg,
                      const QuantizedGamut& gamut, std::int64_t step) {
  if (images.empty()) throw std::invalid_argument("no training images");
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  Rng rng(seq);
  const int S = cfg.image_size, N = cfg.batch_size, Q = gamut.Q();
  const bool local = cfg.variant == Variant::kLocal;
  TrainBatch b;
  b.input = torch::zeros({N, local ? 4 : 1, S, S});
  b.target = torch::zeros({N, 2, S, S});
  if (local) {
    b.dist = torch::zeros({N, Q, S / 4, S / 4});
  } else {
    b.global = torch::zeros({N, Q + 3});
  }
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::bernoulli_distribution coin(0.5);
  for (int n = 0; n < N; ++n) {
    const auto& img = images[pick(rng)];
    const int y0 = std::uniform_int_distribution<int>(0, img.rgb.height - S)(rng);
    const int x0 = std::uniform_int_distribution<int>(0, img.rgb.width - S)(rng);
    const bool flip = cfg.flip && coin(rng);
    const Crop c = crop(img, y0, x0, S, flip);

    b.target[n] = ab_tensor(c.lab.ab)[0];
    if (local) {
      const LocalHints hints = simulate_local_hints(c.lab.ab, cfg.sim, rng);
      b.input[n] = local_input_tensor(c.lab.gray, &hints)[0];
      const ColorDistribution z = soft_encode(resize_ab(c.lab.ab, S / 4, S / 4), gamut);
      b.dist[n] = torch::from_blob(const_cast<float*>(z.probs.data()), {S / 4, S / 4, Q}, torch::kFloat32)
                      .permute({2, 0, 1});
    } else {
      b.input[n] = local_input_tensor(c.lab.gray, nullptr)[0];
      const GlobalHints full = compute_global_hints(c.lab, c.rgb, gamut, true, true);
      const auto packed = simulate_global_hints(full, rng).packed();
      b.global[n] = torch::from_blob(const_cast<float*>(packed.data()), {Q + 3}, torch::kFloat32).clone();
    }
  }
  return b;
}

double cosine_lr(const TrainConfig& cfg, std::int64_t step) {
  const double lo = cfg.lr * cfg.lr_final_fraction;
  if (cfg.steps <= 1) return cfg.lr;
  const double t = std::clamp(static_cast<double>(step) / (cfg.steps - 1), 0.0, 1.0);
  return lo + 0.5 * (cfg.lr - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

StepLosses train_step(ColorNet& net, torch::optim::Optimizer& opt, const TrainBatch& batch,
                      const TrainConfig& cfg, double main_weight) {
  const bool local = cfg.variant == Variant::kLocal;
  net->train();
  auto out = net->forward(batch.input, batch.global, local);
  auto huber = huber_loss(out.ab, batch.target, cfg.loss.delta).mean();
  torch::Tensor loss = main_weight != 0.0 ? main_weight * huber : torch::zeros({});
  StepLosses s;
  s.huber = huber.item<double>();
  if (local) {
    auto ce = cross_entropy_from_logits(out.logits, batch.dist).mean();
    s.ce = ce.item<double>();
    loss = loss + cfg.side_branch_weight * ce;
  }
  if (!std::isfinite(s.huber) || !std::isfinite(s.ce)) return s;
  opt.zero_grad();
  loss.backward();
  opt.step();
  return s;
}

namespace {

void write_outputs(const ColorizationModel& model, torch::optim::Adam& opt, const std::string& path) {
  save_checkpoint(model, path);
  torch::save(opt, path + ".optim");
}

}  // namespace

TrainResult train(const std::vector<TrainingImage>& images, const TrainConfig& cfg,
                  const QuantizedGamut& gamut, const StepCallback& on_step) {
  cfg.validate();
  if (cfg.threads > 0) torch::set_num_threads(cfg.threads);
  std::shared_ptr<ColorizationModel> model;
  if (!cfg.resume.empty()) {
    model = load_checkpoint(cfg.resume, &gamut);
    if (model->config().hash() != cfg.network(gamut.Q()).hash()) {
      throw ConfigMismatch("resume checkpoint has a different network config");
    }
  } else {
    model = std::make_shared<ColorizationModel>(cfg.network(gamut.Q()), gamut, cfg.seed);
  }
  auto& net = model->net();
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.lr));
  if (!cfg.resume.empty() && fs::exists(cfg.resume + ".optim")) torch::load(opt, cfg.resume + ".optim");

  std::ofstream log;
  if (!cfg.log.empty()) {
    const bool append = !cfg.resume.empty() && fs::exists(cfg.log);
    log.open(cfg.log, append ? std::ios::app : std::ios::trunc);
    if (!append) log << "step,huber,ce,lr\n";
  }

  TrainResult result;
  std::string last_good;
  for (std::int64_t step = model->step(); step < cfg.steps; ++step) {
    const double lr = cosine_lr(cfg, step);
    for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    const TrainBatch batch = make_batch(images, cfg, gamut, step);
    StepLosses s = train_step(net, opt, batch, cfg);
    s.lr = lr;
    if (!std::isfinite(s.huber) || !std::isfinite(s.ce)) {
      // The weights are still those of the previous step; keep them.
      if (!cfg.out.empty()) {
        net->eval();
        write_outputs(*model, opt, cfg.out);
        last_good = cfg.out;
      }
      throw TrainingDiverged(step, last_good);
    }
    model->set_step(step + 1);
    result.trace.push_back(s);
    if (log.is_open()) log << step << "," << s.huber << "," << s.ce << "," << lr << "\n";
    if (on_step) on_step(step, s);
    if (!cfg.out.empty() && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      net->eval();
      write_outputs(*model, opt, cfg.out);
      last_good = cfg.out;
    }
  }
  net->eval();
  if (!cfg.out.empty()) write_outputs(*model, opt, cfg.out);
  result.model = model;
  return result;
}

TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  const QuantizedGamut gamut = resolve_gamut(cfg.gamut);
  const auto images = load_split(manifest, Split::kTrain, cfg.max_images, cfg.image_size);
  if (images.empty()) throw std::runtime_error("train split is empty");
  return train(images, cfg, gamut, on_step);
}

}  // namespace hintcolor
