#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "hintcolor/dataset.hpp"
#include "hintcolor/hints.hpp"
#include "hintcolor/losses.hpp"
#include "hintcolor/model.hpp"

namespace hintcolor {

struct TrainConfig {
  Variant variant = Variant::kLocal;
  int image_size = 128;  // side of the square training crops
  int batch_size = 16;
  int steps = 1000;
  double lr = 3e-4;
  // Cosine decay ends at lr * lr_final_fraction.
  double lr_final_fraction = 0.01;
  bool flip = true;
  SimConfig sim;
  LossConfig loss;
  double side_branch_weight = 1.0;
  int checkpoint_every = 0;  // 0 writes only the final checkpoint
  std::uint64_t seed = 0;
  int max_images = 0;  // 0 uses the whole train split

  int base_width = 32;
  int convs_per_block = 2;
  bool use_batchnorm = true;

  std::string out;     // checkpoint path; empty disables writing
  std::string gamut;   // gamut file; empty uses the shipped reference mask
  std::string log;     // per-step loss CSV; empty disables
  std::string resume;  // checkpoint to continue from
  int threads = 0;     // 0 keeps the torch default

  NetworkConfig network(int q) const;
  void validate() const;
};

/// Flat JSON object whose keys mirror the TrainConfig fields (sim and loss
/// fields appear as geometric_p, full_reveal_prob, patch_min, patch_max,
/// huber_delta). Unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

/// Color images held in memory as both sRGB and Lab.
struct TrainingImage {
  RgbImage rgb;
  LabImage lab;
};

/// Images of one split, upscaled where needed so that both sides are at
/// least `min_side`.
std::vector<TrainingImage> load_split(const DatasetManifest& m, Split split, int max_images, int min_side);

struct TrainBatch {
  torch::Tensor input;   // N x C x S x S
  torch::Tensor target;  // N x 2 x S x S, ab units
  torch::Tensor global;  // N x (Q+3), global variant only
  torch::Tensor dist;    // N x Q x S/4 x S/4 soft-encoded target, local variant only
};

/// Crops, flips and simulated hints for one step. Randomness is derived
/// from (seed, step) only, so a resumed run sees the same batches.
TrainBatch make_batch(const std::vector<TrainingImage>& images, const TrainConfig& cfg,
                      const QuantizedGamut& gamut, std::int64_t step);

struct StepLosses {
  double huber = 0.0;  // mean over the batch of per-image sums
  double ce = 0.0;     // same, side branch
  double lr = 0.0;
};

/// One optimizer step. The main-branch loss is scaled by `main_weight`;
/// zero drops it from the objective entirely.
StepLosses train_step(ColorNet& net, torch::optim::Optimizer& opt, const TrainBatch& batch,
                      const TrainConfig& cfg, double main_weight = 1.0);

double cosine_lr(const TrainConfig& cfg, std::int64_t step);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::int64_t step, std::string last_good)
      : std::runtime_error("loss is not finite at step " + std::to_string(step) +
                           (last_good.empty() ? "" : "; last good checkpoint: " + last_good)),
        step_(step),
        last_good_(std::move(last_good)) {}
  std::int64_t step() const { return step_; }
  const std::string& last_good() const { return last_good_; }

 private:
  std::int64_t step_;
  std::string last_good_;
};

struct TrainResult {
  std::shared_ptr<ColorizationModel> model;
  std::vector<StepLosses> trace;  // one entry per step run in this call
};

using StepCallback = std::function<void(std::int64_t step, const StepLosses&)>;

TrainResult train(const std::vector<TrainingImage>& images, const TrainConfig& cfg,
                  const QuantizedGamut& gamut, const StepCallback& on_step = {});
TrainResult train(const DatasetManifest& manifest, const TrainConfig& cfg, const StepCallback& on_step = {});

/// Loads the gamut named by a config (or the shipped reference mask).
QuantizedGamut resolve_gamut(const std::string& path);

/// Location of the shipped data directory (HINTCOLOR_DATA_DIR overrides).
std::filesystem::path data_dir();

}  // namespace hintcolor
