#include "hintcolor/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace hintcolor {

double huber(double diff, double delta) {
  const double d = std::abs(diff);
  return d < delta ? 0.5 * d * d : delta * (d - 0.5 * delta);
}

double huber_image_loss(const AbImage& pred, const AbImage& target, const LossConfig& cfg) {
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("huber delta must be positive");
  if (pred.height != target.height || pred.width != target.width) {
    throw std::invalid_argument("huber_image_loss: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.ab.size(); ++i) {
    sum += huber(static_cast<double>(pred.ab[i]) - target.ab[i], cfg.delta);
  }
  return sum;
}

double cross_entropy_image_loss(const ColorDistribution& pred, const ColorDistribution& target) {
  if (pred.height != target.height || pred.width != target.width || pred.bins != target.bins) {
    throw std::invalid_argument("cross_entropy_image_loss: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.probs.size(); ++i) {
    if (target.probs[i] == 0.f) continue;
    sum -= target.probs[i] * std::log(std::max<double>(pred.probs[i], kProbFloor));
  }
  return sum;
}

torch::Tensor huber_loss(const torch::Tensor& pred, const torch::Tensor& target, double delta) {
  TORCH_CHECK(pred.sizes() == target.sizes(), "huber_loss: shape mismatch ", pred.sizes(), " vs ",
              target.sizes());
  TORCH_CHECK(delta > 0.0, "huber delta must be positive");
  auto d = (pred - target).abs();
  auto per = torch::where(d < delta, 0.5 * d * d, delta * (d - 0.5 * delta));
  return per.flatten(1).sum(1);
}

torch::Tensor cross_entropy_loss(const torch::Tensor& pred_probs, const torch::Tensor& target) {
  TORCH_CHECK(pred_probs.sizes() == target.sizes(), "cross_entropy_loss: shape mismatch");
  return -(target * pred_probs.clamp_min(kProbFloor).log()).flatten(1).sum(1);
}

torch::Tensor cross_entropy_from_logits(const torch::Tensor& logits, const torch::Tensor& target) {
  TORCH_CHECK(logits.sizes() == target.sizes(), "cross_entropy_from_logits: shape mismatch");
  auto logp = torch::log_softmax(logits, 1).clamp_min(std::log(kProbFloor));
  return -(target * logp).flatten(1).sum(1);
}

}  // namespace hintcolor
