#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hintcolor/bench.hpp"
#include "hintcolor/dataset.hpp"
#include "hintcolor/levin.hpp"
#include "hintcolor/model.hpp"

namespace hintcolor {

// auto: no hints. gt-colors: every pixel revealed (local model).
// global-hist / global-sat: one global statistic revealed (global model).
enum class EvalMode { kAuto, kGtColors, kGlobalHist, kGlobalSat };

std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& s);

struct EvalSummary {
  EvalMode mode = EvalMode::kAuto;
  double psnr_mean = 0.0;
  double psnr_stderr = 0.0;
  std::vector<double> psnrs;
};

/// Colorizes one image in the given mode; reference ab comes from `rgb`.
AbImage colorize_for_mode(const ColorizationModel& model, const RgbImage& rgb, EvalMode mode);

EvalSummary evaluate(const std::vector<BenchImage>& images, const ColorizationModel& model, EvalMode mode);

/// Readable images of a split (unreadable ones counted in `skipped`).
std::vector<BenchImage> load_bench_images(const DatasetManifest& m, Split split, int max_images = 0,
                                          int* skipped = nullptr);

Colorizer network_colorizer(std::shared_ptr<const ColorizationModel> model);
Colorizer levin_colorizer(LevinConfig cfg = {});

}  // namespace hintcolor
