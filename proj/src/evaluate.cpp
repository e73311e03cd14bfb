#include "hintcolor/evaluate.hpp"

#include <stdexcept>

namespace hintcolor {

std::string to_string(EvalMode m) {
  switch (m) {
    case EvalMode::kAuto: return "auto";
    case EvalMode::kGtColors: return "gt-colors";
    case EvalMode::kGlobalHist: return "global-hist";
    case EvalMode::kGlobalSat: return "global-sat";
  }
  return "auto";
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "auto") return EvalMode::kAuto;
  if (s == "gt-colors") return EvalMode::kGtColors;
  if (s == "global-hist") return EvalMode::kGlobalHist;
  if (s == "global-sat") return EvalMode::kGlobalSat;
  throw std::invalid_argument("unknown eval mode: " + s);
}

AbImage colorize_for_mode(const ColorizationModel& model, const RgbImage& rgb, EvalMode mode) {
  const LabImage lab = rgb_to_lab(rgb);
  const bool local = model.config().variant == Variant::kLocal;
  switch (mode) {
    case EvalMode::kAuto:
      if (local) return model.forward_local(lab.gray, LocalHints(rgb.height, rgb.width));
      return model.forward_global(lab.gray, compute_global_hints(lab, rgb, model.gamut(), false, false));
    case EvalMode::kGtColors: {
      if (!local) throw ConfigMismatch("gt-colors mode needs a local-hints checkpoint");
      LocalHints all(rgb.height, rgb.width);
      all.ab = lab.ab.ab;
      std::fill(all.mask.begin(), all.mask.end(), 1.f);
      return model.forward_local(lab.gray, all);
    }
    case EvalMode::kGlobalHist:
    case EvalMode::kGlobalSat:
      if (local) throw ConfigMismatch(to_string(mode) + " mode needs a global-hints checkpoint");
      return model.forward_global(
          lab.gray, compute_global_hints(lab, rgb, model.gamut(), mode == EvalMode::kGlobalHist,
                                         mode == EvalMode::kGlobalSat));
  }
  throw std::logic_error("unhandled eval mode");
}

EvalSummary evaluate(const std::vector<BenchImage>& images, const ColorizationModel& model, EvalMode mode) {
  if (images.empty()) throw std::invalid_argument("evaluation split is empty");
  EvalSummary s;
  s.mode = mode;
  for (const auto& img : images) {
    const AbImage ab = colorize_for_mode(model, img.rgb, mode);
    s.psnrs.push_back(psnr(img.rgb, lab_to_rgb(rgb_to_lab(img.rgb).gray, ab)));
  }
  std::tie(s.psnr_mean, s.psnr_stderr) = mean_stderr(s.psnrs);
  return s;
}

std::vector<BenchImage> load_bench_images(const DatasetManifest& m, Split split, int max_images, int* skipped) {
  std::vector<BenchImage> out;
  int bad = 0;
  for (const auto& path : m.files(split)) {
    if (max_images > 0 && static_cast<int>(out.size()) >= max_images) break;
    try {
      out.push_back({path.filename().string(), read_image(path)});
    } catch (const std::exception&) {
      ++bad;
    }
  }
  if (skipped) *skipped = bad;
  return out;
}

Colorizer network_colorizer(std::shared_ptr<const ColorizationModel> model) {
  if (model->config().variant != Variant::kLocal) {
    throw ConfigMismatch("network_local needs a local-hints checkpoint");
  }
  return [model](const GrayImage& gray, const LocalHints& hints) { return model->forward_local(gray, hints); };
}

Colorizer levin_colorizer(LevinConfig cfg) {
  return [cfg](const GrayImage& gray, const LocalHints& hints) { return propagate_edits(gray, hints, cfg); };
}

}  // namespace hintcolor
