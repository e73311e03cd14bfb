#include "hintcolor/model.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "hintcolor/detail/fnv.hpp"

namespace hintcolor {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

std::string to_string(Variant v) { return v == Variant::kLocal ? "local" : "global"; }

Variant variant_from_string(const std::string& s) {
  if (s == "local") return Variant::kLocal;
  if (s == "global") return Variant::kGlobal;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::array<int, 10> NetworkConfig::widths() const {
  const int b = base_width;
  return {b, 2 * b, 4 * b, 8 * b, 8 * b, 8 * b, 8 * b, 4 * b, 2 * b, b};
}

namespace {

// log2 of the downsampling factor at the output of each block.
constexpr std::array<int, 10> kBlockLevel{0, 1, 2, 3, 3, 3, 3, 2, 1, 0};

}  // namespace

void NetworkConfig::validate() const {
  if (base_width < 1) throw std::invalid_argument("base_width must be positive");
  if (convs_per_block < 1) throw std::invalid_argument("convs_per_block must be positive");
  if (dilation < 1) throw std::invalid_argument("dilation must be positive");
  if (q < 1) throw std::invalid_argument("q must be positive");
  for (const auto& [e, d] : shortcut_pairs) {
    if (e < 1 || e > 4 || d < 8 || d > 10 || kBlockLevel[e - 1] != kBlockLevel[d - 1]) {
      throw std::invalid_argument("shortcut " + std::to_string(e) + "->" + std::to_string(d) +
                                  " joins blocks at different resolutions");
    }
  }
}

std::uint64_t NetworkConfig::hash() const {
  detail::Fnv1a h;
  h.update(to_string(variant));
  h.update_value(base_width);
  h.update_value(convs_per_block);
  h.update_value(dilation);
  for (const auto& [e, d] : shortcut_pairs) {
    h.update_value(e);
    h.update_value(d);
  }
  const unsigned char bn = use_batchnorm ? 1 : 0;
  h.update_value(bn);
  h.update_value(global_layers);
  h.update_value(hidden_classifier_width());
  h.update_value(q);
  return h.digest();
}

torch::nn::Sequential ColorNetImpl::make_block(int in_ch, int out_ch, int dilation, int convs,
                                               bool first_is_identity) {
  torch::nn::Sequential seq;
  int ch = first_is_identity ? out_ch : in_ch;
  for (int k = first_is_identity ? 1 : 0; k < convs; ++k) {
    seq->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(ch, out_ch, 3).padding(dilation).dilation(dilation)));
    seq->push_back(torch::nn::ReLU());
    ch = out_ch;
  }
  if (cfg_.use_batchnorm) seq->push_back(torch::nn::BatchNorm2d(out_ch));
  return seq;
}

ColorNetImpl::ColorNetImpl(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto w = cfg_.widths();
  const int in_ch = cfg_.variant == Variant::kLocal ? 4 : 1;
  for (int k = 0; k < 10; ++k) {
    const bool decoder = k >= 7;
    const int prev = k == 0 ? in_ch : w[k - 1];
    const int dil = (k == 4 || k == 5) ? cfg_.dilation : 1;
    blocks_[k] = register_module("conv" + std::to_string(k + 1),
                                 make_block(prev, w[k], dil, cfg_.convs_per_block, decoder));
    if (decoder) {
      up_convs_[k - 7] = register_module(
          "conv" + std::to_string(k + 1) + "_up",
          torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, w[k], 3).padding(1)));
    }
  }
  for (const auto& [e, d] : cfg_.shortcut_pairs) {
    auto proj = register_module(
        "shortcut" + std::to_string(e) + "_" + std::to_string(d),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(w[e - 1], w[d - 1], 1)));
    shortcut_proj_.emplace_back(e, proj);
  }
  out_conv_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(w[9], 2, 1)));

  if (cfg_.variant == Variant::kGlobal) {
    torch::nn::Sequential g;
    int ch = cfg_.q + 3;
    for (int k = 0; k < cfg_.global_layers; ++k) {
      g->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, w[3], 1)));
      g->push_back(torch::nn::ReLU());
      ch = w[3];
    }
    global_branch_ = register_module("global_branch", g);
  } else {
    const int taps = w[1] + w[3] + w[5] + w[7];
    torch::nn::Sequential c;
    c->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(taps, cfg_.hidden_classifier_width(), 1)));
    c->push_back(torch::nn::ReLU());
    c->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.hidden_classifier_width(), cfg_.q, 1)));
    classifier_ = register_module("classifier", c);
  }
}

NetOutput ColorNetImpl::forward(const torch::Tensor& input, const torch::Tensor& global,
                                bool with_distribution) {
  const int expected_ch = cfg_.variant == Variant::kLocal ? 4 : 1;
  TORCH_CHECK(input.dim() == 4 && input.size(1) == expected_ch, "unexpected input shape ",
              input.sizes());
  TORCH_CHECK(input.size(2) % 8 == 0 && input.size(3) % 8 == 0,
              "spatial size must be a multiple of 8, got ", input.sizes());
  auto subsample = [](const torch::Tensor& t) {
    return t.index({Slice(), Slice(), Slice(torch::indexing::None, torch::indexing::None, 2),
                    Slice(torch::indexing::None, torch::indexing::None, 2)});
  };

  std::array<torch::Tensor, 10> x;
  x[0] = blocks_[0]->forward(input);
  x[1] = blocks_[1]->forward(subsample(x[0]));
  x[2] = blocks_[2]->forward(subsample(x[1]));
  x[3] = blocks_[3]->forward(subsample(x[2]));
  if (cfg_.variant == Variant::kGlobal) {
    TORCH_CHECK(global.defined() && global.dim() == 2 && global.size(1) == cfg_.q + 3,
                "global variant needs an N x (Q+3) hint tensor");
    x[3] = x[3] + global_branch_->forward(global.view({global.size(0), global.size(1), 1, 1}));
  }
  x[4] = blocks_[4]->forward(x[3]);
  x[5] = blocks_[5]->forward(x[4]);
  x[6] = blocks_[6]->forward(x[5]);
  for (int k = 7; k < 10; ++k) {
    auto up = F::interpolate(x[k - 1], F::InterpolateFuncOptions()
                                           .scale_factor(std::vector<double>{2.0, 2.0})
                                           .mode(torch::kNearest));
    auto h = up_convs_[k - 7]->forward(up);
    for (std::size_t s = 0; s < cfg_.shortcut_pairs.size(); ++s) {
      if (cfg_.shortcut_pairs[s].second == k + 1) {
        h = h + shortcut_proj_[s].second->forward(x[cfg_.shortcut_pairs[s].first - 1]);
      }
    }
    x[k] = blocks_[k]->forward(torch::relu(h));
  }
  NetOutput out;
  out.ab = torch::tanh(out_conv_->forward(x[9])) * kAbScale;

  if (with_distribution) {
    TORCH_CHECK(cfg_.variant == Variant::kLocal, "only the local variant predicts distributions");
    const std::vector<int64_t> quarter{input.size(2) / 4, input.size(3) / 4};
    std::vector<torch::Tensor> taps;
    for (int k : {1, 3, 5, 7}) {
      // Side-task gradients stop here; the main branch never sees them.
      auto t = x[k].detach();
      if (t.size(2) != quarter[0] || t.size(3) != quarter[1]) {
        t = F::interpolate(t, F::InterpolateFuncOptions().size(quarter).mode(torch::kBilinear).align_corners(false));
      }
      taps.push_back(t);
    }
    out.logits = classifier_->forward(torch::cat(taps, 1));
  }
  return out;
}

std::vector<torch::Tensor> ColorNetImpl::main_parameters() {
  std::vector<torch::Tensor> out;
  for (const auto& item : named_parameters()) {
    if (item.key().rfind("classifier.", 0) != 0) out.push_back(item.value());
  }
  return out;
}

std::vector<torch::Tensor> ColorNetImpl::side_parameters() {
  if (!classifier_) return {};
  return classifier_->parameters();
}

torch::Tensor pad_to_multiple(const torch::Tensor& x, int multiple) {
  const auto h = x.size(-2), w = x.size(-1);
  const auto ph = (multiple - h % multiple) % multiple;
  const auto pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  const bool can_reflect = ph < h && pw < w;
  F::PadFuncOptions::mode_t mode = torch::kReplicate;
  if (can_reflect) mode = torch::kReflect;
  return F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(mode));
}

torch::Tensor local_input_tensor(const GrayImage& gray, const LocalHints* hints) {
  const int h = gray.height, w = gray.width;
  const int ch = hints ? 4 : 1;
  auto t = torch::zeros({1, ch, h, w}, torch::kFloat32);
  auto acc = t.accessor<float, 4>();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      acc[0][0][y][x] = normalize_l(gray.at(y, x));
      if (hints) {
        const auto i = static_cast<std::size_t>(y) * w + x;
        acc[0][1][y][x] = hints->ab[2 * i] / kAbScale;
        acc[0][2][y][x] = hints->ab[2 * i + 1] / kAbScale;
        acc[0][3][y][x] = hints->mask[i];
      }
    }
  }
  return t;
}

torch::Tensor ab_tensor(const AbImage& ab) {
  auto t = torch::from_blob(const_cast<float*>(ab.ab.data()), {ab.height, ab.width, 2}, torch::kFloat32);
  return t.permute({2, 0, 1}).unsqueeze(0).contiguous();
}

AbImage ab_from_tensor(const torch::Tensor& t) {
  auto x = t.dim() == 4 ? t[0] : t;
  x = x.to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  AbImage out(static_cast<int>(x.size(0)), static_cast<int>(x.size(1)));
  std::memcpy(out.ab.data(), x.data_ptr<float>(), out.ab.size() * sizeof(float));
  return out;
}

ColorizationModel::ColorizationModel(NetworkConfig cfg, QuantizedGamut gamut, std::uint64_t seed)
    : net_(nullptr), gamut_(std::move(gamut)) {
  cfg.q = gamut_.Q();
  torch::manual_seed(seed);
  net_ = ColorNet(cfg);
  net_->eval();
}

ColorizationModel::ColorizationModel(ColorNet net, QuantizedGamut gamut, std::int64_t step)
    : net_(std::move(net)), gamut_(std::move(gamut)), step_(step) {
  if (net_->config().q != gamut_.Q()) {
    throw ConfigMismatch("network Q " + std::to_string(net_->config().q) + " does not match gamut Q " +
                         std::to_string(gamut_.Q()));
  }
  net_->eval();
}

std::uint64_t ColorizationModel::config_hash() const {
  detail::Fnv1a h;
  h.update_value(config().hash());
  h.update_value(gamut_.hash());
  return h.digest();
}

NetOutput ColorizationModel::run(const GrayImage& gray, const LocalHints* hints,
                                 const GlobalHints* ghints, bool with_distribution) const {
  if (gray.height <= 0 || gray.width <= 0) throw std::invalid_argument("empty grayscale image");
  const bool local = config().variant == Variant::kLocal;
  if (local && !hints) throw ConfigMismatch("local model needs local hints");
  if (!local && !ghints) throw ConfigMismatch("global model needs global hints");
  if (hints && (hints->height != gray.height || hints->width != gray.width)) {
    throw std::invalid_argument("gray and hints dimensions differ");
  }
  torch::NoGradGuard no_grad;
  if (net_->is_training()) net_->eval();
  auto input = pad_to_multiple(local_input_tensor(gray, local ? hints : nullptr), 8);
  torch::Tensor global;
  if (!local) {
    if (static_cast<int>(ghints->histogram.size()) != gamut_.Q()) {
      throw std::invalid_argument("global histogram length does not match gamut Q");
    }
    GlobalHints g = *ghints;
    if (g.hist_flag == 0.f) std::fill(g.histogram.begin(), g.histogram.end(), 0.f);
    if (g.sat_flag == 0.f) g.saturation = 0.f;
    const auto packed = g.packed();
    global = torch::from_blob(const_cast<float*>(packed.data()), {1, static_cast<long>(packed.size())},
                              torch::kFloat32)
                 .clone();
  }
  NetOutput out = net_->forward(input, global, with_distribution);
  out.ab = out.ab.index({Slice(), Slice(), Slice(0, gray.height), Slice(0, gray.width)});
  if (with_distribution) {
    const int qh = (gray.height + 3) / 4, qw = (gray.width + 3) / 4;
    out.logits = out.logits.index({Slice(), Slice(), Slice(0, qh), Slice(0, qw)});
  }
  return out;
}

AbImage ColorizationModel::forward_local(const GrayImage& gray, const LocalHints& hints) const {
  if (config().variant != Variant::kLocal) throw ConfigMismatch("forward_local needs a local model");
  return ab_from_tensor(run(gray, &hints, nullptr, false).ab);
}

ColorDistribution ColorizationModel::forward_distribution(const GrayImage& gray,
                                                          const LocalHints& hints) const {
  if (config().variant != Variant::kLocal) {
    throw ConfigMismatch("forward_distribution needs a local model");
  }
  auto logits = run(gray, &hints, nullptr, true).logits;
  auto probs = torch::softmax(logits.to(torch::kFloat64), 1).to(torch::kFloat32)[0].permute({1, 2, 0}).contiguous();
  ColorDistribution dist(static_cast<int>(probs.size(0)), static_cast<int>(probs.size(1)), gamut_.Q());
  std::memcpy(dist.probs.data(), probs.data_ptr<float>(), dist.probs.size() * sizeof(float));
  return dist;
}

AbImage ColorizationModel::forward_global(const GrayImage& gray, const GlobalHints& hints) const {
  if (config().variant != Variant::kGlobal) throw ConfigMismatch("forward_global needs a global model");
  return ab_from_tensor(run(gray, nullptr, &hints, false).ab);
}

}  // namespace hintcolor
