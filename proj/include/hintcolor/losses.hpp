#pragma once

#include <torch/torch.h>

#include "hintcolor/colorspace.hpp"

namespace hintcolor {

struct LossConfig {
  double delta = 1.0;
};

// Probabilities below this floor are clamped before taking the log.
inline constexpr double kProbFloor = 1e-10;

/// Per-element Huber value: 0.5 d^2 below delta, delta (|d| - delta/2) above.
double huber(double diff, double delta);

/// Huber summed over all pixels and both channels.
double huber_image_loss(const AbImage& pred, const AbImage& target, const LossConfig& cfg = {});

/// -sum Z log(max(Zhat, 1e-10)) over all pixels and bins.
double cross_entropy_image_loss(const ColorDistribution& pred, const ColorDistribution& target);

// Differentiable forms. Shapes: N x 2 x H x W for ab, N x Q x H x W for
// distributions. Both return per-image sums stacked into a length-N tensor.
torch::Tensor huber_loss(const torch::Tensor& pred, const torch::Tensor& target, double delta = 1.0);
torch::Tensor cross_entropy_loss(const torch::Tensor& pred_probs, const torch::Tensor& target);
torch::Tensor cross_entropy_from_logits(const torch::Tensor& logits, const torch::Tensor& target);

}  // namespace hintcolor
