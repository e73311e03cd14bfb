#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "hintcolor/colorspace.hpp"
#include "hintcolor/hints.hpp"

namespace hintcolor {

enum class Variant { kLocal, kGlobal };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct NetworkConfig {
  Variant variant = Variant::kLocal;
  // Channels of block 1; blocks 2-4 double it, blocks 8-10 mirror back down.
  int base_width = 32;
  int convs_per_block = 2;
  // Dilation of blocks 5-6.
  int dilation = 2;
  // (encoder block, decoder block) pairs joined by a projected addition.
  std::vector<std::pair<int, int>> shortcut_pairs{{1, 10}, {2, 9}, {3, 8}};
  bool use_batchnorm = true;
  int global_layers = 4;
  // Hidden width of the two-layer hypercolumn classifier; 0 picks 4*base_width.
  int classifier_width = 0;
  // Gamut size the distribution head and global input are sized for.
  int q = 313;

  /// Output channels of blocks 1..10.
  std::array<int, 10> widths() const;
  int hidden_classifier_width() const { return classifier_width > 0 ? classifier_width : 4 * base_width; }
  std::uint64_t hash() const;
  void validate() const;
};

// Normalization of network inputs and outputs.
inline constexpr float kAbScale = 110.f;
inline float normalize_l(float L) { return L / 100.f - 0.5f; }

struct NetOutput {
  torch::Tensor ab;      // N x 2 x H x W, ab units
  torch::Tensor logits;  // N x Q x H/4 x W/4, undefined unless requested
};

// The colorization network. Spatial sizes must be multiples of 8.
class ColorNetImpl : public torch::nn::Module {
 public:
  explicit ColorNetImpl(NetworkConfig cfg);

  /// `input` is N x C x H x W: normalized L, plus normalized ab and mask for
  /// the local variant. `global` is N x (Q+3) for the global variant.
  NetOutput forward(const torch::Tensor& input, const torch::Tensor& global = {},
                    bool with_distribution = false);

  const NetworkConfig& config() const { return cfg_; }

  /// Parameters of the main branch (and global branch), excluding the
  /// hypercolumn classifier.
  std::vector<torch::Tensor> main_parameters();
  std::vector<torch::Tensor> side_parameters();

 private:
  torch::nn::Sequential make_block(int in_ch, int out_ch, int dilation, int convs, bool first_is_identity);

  NetworkConfig cfg_;
  std::array<torch::nn::Sequential, 10> blocks_;
  // Upsampling decoder blocks 8-10: conv after upsample, then the rest.
  std::array<torch::nn::Conv2d, 3> up_convs_{nullptr, nullptr, nullptr};
  std::vector<std::pair<int, torch::nn::Conv2d>> shortcut_proj_;
  torch::nn::Conv2d out_conv_{nullptr};
  torch::nn::Sequential global_branch_{nullptr};
  torch::nn::Sequential classifier_{nullptr};
};
TORCH_MODULE(ColorNet);

/// Packs gray (+hints) into an N=1 network input, normalized.
torch::Tensor local_input_tensor(const GrayImage& gray, const LocalHints* hints);
torch::Tensor ab_tensor(const AbImage& ab);
AbImage ab_from_tensor(const torch::Tensor& t);  // 1 x 2 x H x W or 2 x H x W

class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Learned weights plus what is needed to use them: the config, the gamut the
// distribution head was trained against, and the training step.
class ColorizationModel {
 public:
  ColorizationModel(NetworkConfig cfg, QuantizedGamut gamut, std::uint64_t seed = 0);
  ColorizationModel(ColorNet net, QuantizedGamut gamut, std::int64_t step = 0);

  const NetworkConfig& config() const { return net_->config(); }
  const QuantizedGamut& gamut() const { return gamut_; }
  ColorNet& net() { return net_; }
  const ColorNet& net() const { return net_; }
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  /// Inference-mode colorization from sparse hints. Output has the input's
  /// size; inputs not divisible by 8 are reflection padded then cropped.
  AbImage forward_local(const GrayImage& gray, const LocalHints& hints) const;

  /// Quarter-resolution (ceil(H/4) x ceil(W/4)) color distribution.
  ColorDistribution forward_distribution(const GrayImage& gray, const LocalHints& hints) const;

  /// Colorization from global statistics. Unrevealed slots are zeroed first.
  AbImage forward_global(const GrayImage& gray, const GlobalHints& hints) const;

  /// Digest of the config and gamut, stored in checkpoints.
  std::uint64_t config_hash() const;

 private:
  NetOutput run(const GrayImage& gray, const LocalHints* hints, const GlobalHints* ghints,
                bool with_distribution) const;

  mutable ColorNet net_;
  QuantizedGamut gamut_;
  std::int64_t step_ = 0;
};

/// Pads H and W at the bottom/right up to multiples of `multiple` by
/// reflection (replication when the image is too small to reflect).
torch::Tensor pad_to_multiple(const torch::Tensor& x, int multiple);

// Checkpoint: `<path>` holds the weights, `<path>.json` the manifest
// {format:"ckpt-v1", variant, base_width, Q, gamut_hash, step, config_hash, ...},
// `<path>.gamut.json` the gamut.
void save_checkpoint(const ColorizationModel& model, const std::filesystem::path& path);

/// Throws ConfigMismatch when the manifest disagrees with the weights or the
/// supplied gamut.
std::shared_ptr<ColorizationModel> load_checkpoint(const std::filesystem::path& path,
                                                   const QuantizedGamut* gamut = nullptr);

std::string hex64(std::uint64_t v);

}  // namespace hintcolor
