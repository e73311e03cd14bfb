#include "hintcolor/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hintcolor/detail/fnv.hpp"

namespace hintcolor {

double psnr(const RgbImage& reference, const RgbImage& test) {
  if (reference.height != test.height || reference.width != test.width ||
      reference.data.size() != test.data.size()) {
    throw std::invalid_argument("psnr: image dimensions differ");
  }
  if (reference.data.empty()) throw std::invalid_argument("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i) {
    const double d = static_cast<double>(reference.data[i]) - static_cast<double>(test.data[i]);
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(reference.data.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

std::string to_string(Sampler s) { return s == Sampler::kRandom ? "random" : "max_error"; }

Sampler sampler_from_string(const std::string& s) {
  if (s == "random") return Sampler::kRandom;
  if (s == "max_error" || s == "max-error" || s == "max") return Sampler::kMaxError;
  throw std::invalid_argument("unknown sampler: " + s);
}

void validate(const BenchConfig& cfg) {
  if (!std::is_sorted(cfg.point_counts.begin(), cfg.point_counts.end())) {
    throw std::invalid_argument("point_counts must be nondecreasing");
  }
  if (!cfg.point_counts.empty() && cfg.point_counts.front() < 0) {
    throw std::invalid_argument("point_counts must be nonnegative");
  }
  if (cfg.reveal_patch < 1 || cfg.reveal_patch % 2 == 0) {
    throw std::invalid_argument("reveal_patch must be odd");
  }
  if (cfg.error_window < 1 || cfg.error_window % 2 == 0) {
    throw std::invalid_argument("error_window must be odd");
  }
  if (cfg.trials_per_image < 1) throw std::invalid_argument("trials_per_image must be >= 1");
}

std::vector<std::pair<int, int>> valid_patch_centers(int height, int width, int patch) {
  const int half = patch / 2;
  std::vector<std::pair<int, int>> out;
  const bool fits = height >= patch && width >= patch;
  const int y0 = fits ? half : 0, y1 = fits ? height - half : height;
  const int x0 = fits ? half : 0, x1 = fits ? width - half : width;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) out.emplace_back(y, x);
  }
  return out;
}

LocalHints sample_random_points(const AbImage& target, int n, int patch, Rng& rng) {
  if (n < 0) throw std::invalid_argument("point count must be nonnegative");
  LocalHints hints(target.height, target.width);
  if (n == 0) return hints;
  const auto centers = valid_patch_centers(target.height, target.width, patch);
  std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
  for (int k = 0; k < n; ++k) {
    const auto [cy, cx] = centers[pick(rng)];
    reveal_patch_mean(hints, target, patch_rect(cy, cx, patch, target.height, target.width));
  }
  return hints;
}

namespace {

// Box mean with the window clipped to the image.
std::vector<double> window_mean(const std::vector<double>& v, int h, int w, int window) {
  std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  auto I = [&](int y, int x) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      I(y + 1, x + 1) = v[static_cast<std::size_t>(y) * w + x] + I(y, x + 1) + I(y + 1, x) - I(y, x);
    }
  }
  const int r = window / 2;
  std::vector<double> out(v.size());
  for (int y = 0; y < h; ++y) {
    const int ya = std::max(0, y - r), yb = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int xa = std::max(0, x - r), xb = std::min(w, x + r + 1);
      const double s = I(yb, xb) - I(ya, xb) - I(yb, xa) + I(ya, xa);
      out[static_cast<std::size_t>(y) * w + x] = s / static_cast<double>((yb - ya) * (xb - xa));
    }
  }
  return out;
}

}  // namespace

MaxErrorResult sample_max_error_points(const AbImage& target, const GrayImage& gray,
                                       const Colorizer& colorizer, const std::vector<int>& counts,
                                       const BenchConfig& cfg) {
  if (!std::is_sorted(counts.begin(), counts.end())) {
    throw std::invalid_argument("counts must be nondecreasing");
  }
  const int h = target.height, w = target.width;
  MaxErrorResult result;
  LocalHints hints(h, w);
  std::vector<unsigned char> occupied(static_cast<std::size_t>(h) * w, 0);
  const auto centers = valid_patch_centers(h, w, cfg.reveal_patch);
  const int n_max = counts.empty() ? 0 : counts.back();
  int placed = 0;
  std::size_t next = 0;
  auto snapshot = [&] {
    while (next < counts.size() && (counts[next] <= placed || result.short_count)) {
      result.hints.push_back(hints);
      result.achieved.push_back(placed);
      ++next;
    }
  };
  snapshot();
  while (placed < n_max && !result.short_count) {
    const AbImage pred = colorizer(gray, hints);
    std::vector<double> err(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < err.size(); ++i) {
      const double da = pred.ab[2 * i] - target.ab[2 * i];
      const double db = pred.ab[2 * i + 1] - target.ab[2 * i + 1];
      err[i] = std::sqrt(da * da + db * db);
    }
    const auto score = window_mean(err, h, w, cfg.error_window);

    std::vector<int> occ_integral(static_cast<std::size_t>(h + 1) * (w + 1), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        occ_integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
            occupied[static_cast<std::size_t>(y) * w + x] +
            occ_integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] +
            occ_integral[static_cast<std::size_t>(y + 1) * (w + 1) + x] -
            occ_integral[static_cast<std::size_t>(y) * (w + 1) + x];
      }
    }
    auto occupied_in = [&](const PatchRect& r) {
      auto I = [&](int y, int x) { return occ_integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
      return I(r.y1, r.x1) - I(r.y0, r.x1) - I(r.y1, r.x0) + I(r.y0, r.x0);
    };

    double best = -1.0;
    PatchRect best_rect{0, 0, 0, 0};
    for (const auto& [cy, cx] : centers) {
      const double s = score[static_cast<std::size_t>(cy) * w + cx];
      if (s <= best) continue;
      const PatchRect r = patch_rect(cy, cx, cfg.reveal_patch, h, w);
      if (occupied_in(r) != 0) continue;
      best = s;
      best_rect = r;
    }
    if (best < 0.0) {
      result.short_count = true;
      break;
    }
    reveal_patch_mean(hints, target, best_rect);
    for (int y = best_rect.y0; y < best_rect.y1; ++y) {
      for (int x = best_rect.x0; x < best_rect.x1; ++x) occupied[static_cast<std::size_t>(y) * w + x] = 1;
    }
    ++placed;
    snapshot();
  }
  snapshot();
  return result;
}

LocalHints sample_max_error_points(const AbImage& target, const GrayImage& gray,
                                   const Colorizer& colorizer, int n, const BenchConfig& cfg,
                                   bool* short_count, int* achieved) {
  auto r = sample_max_error_points(target, gray, colorizer, std::vector<int>{n}, cfg);
  if (short_count) *short_count = r.short_count;
  if (achieved) *achieved = r.achieved.back();
  return r.hints.back();
}

const BenchRow* BenchReport::find(const std::string& method, const std::string& sampler,
                                  int n) const {
  for (const auto& r : rows) {
    if (r.method == method && r.sampler == sampler && r.n == n) return &r;
  }
  return nullptr;
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << kBenchCsvHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    out << r.method << ',' << r.sampler << ',' << r.n << ',';
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,", r.psnr_mean, r.psnr_stderr);
    out << buf << r.images << '\n';
  }
  return out.str();
}

Colorizer gray_colorizer() {
  return [](const GrayImage& gray, const LocalHints&) { return AbImage(gray.height, gray.width); };
}

std::pair<double, double> mean_stderr(const std::vector<double>& values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

BenchReport run_benchmark(const std::vector<BenchImage>& images, const BenchConfig& cfg,
                          const std::map<std::string, Colorizer>& methods) {
  validate(cfg);
  if (images.empty()) throw std::invalid_argument("benchmark dataset is empty");
  for (const auto& m : cfg.methods) {
    if (!methods.contains(m)) throw std::invalid_argument("method not available: " + m);
  }
  BenchReport report;
  detail::Fnv1a dataset_hash;
  for (const auto& img : images) {
    dataset_hash.update(img.name);
    dataset_hash.update(img.rgb.data.data(), img.rgb.data.size());
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(dataset_hash.digest()));
  report.dataset_hash = hex;

  // scores[method][sampler][n index] -> per-image PSNR
  const std::size_t nc = cfg.point_counts.size();
  std::map<std::string, std::map<Sampler, std::vector<std::vector<double>>>> scores;
  for (const auto& m : cfg.methods) {
    for (Sampler s : cfg.samplers) scores[m][s].assign(nc, {});
  }

  for (std::size_t img_idx = 0; img_idx < images.size(); ++img_idx) {
    const RgbImage& rgb = images[img_idx].rgb;
    LabImage lab;
    try {
      lab = rgb_to_lab(rgb);
    } catch (const std::exception&) {
      ++report.skipped_images;
      continue;
    }
    for (const auto& m : cfg.methods) {
      const Colorizer& colorize = methods.at(m);
      auto evaluate = [&](const LocalHints& hints) {
        return psnr(rgb, lab_to_rgb(lab.gray, colorize(lab.gray, hints)));
      };
      for (Sampler s : cfg.samplers) {
        auto& per_n = scores[m][s];
        if (s == Sampler::kRandom) {
          for (std::size_t k = 0; k < nc; ++k) {
            double acc = 0.0;
            for (int t = 0; t < cfg.trials_per_image; ++t) {
              std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                                static_cast<std::uint32_t>(img_idx),
                                static_cast<std::uint32_t>(cfg.point_counts[k]), static_cast<std::uint32_t>(t)};
              Rng rng(seq);
              acc += evaluate(sample_random_points(lab.ab, cfg.point_counts[k], cfg.reveal_patch, rng));
            }
            per_n[k].push_back(acc / cfg.trials_per_image);
          }
        } else {
          const auto sampled = sample_max_error_points(lab.ab, lab.gray, colorize, cfg.point_counts, cfg);
          for (std::size_t k = 0; k < nc; ++k) {
            if (sampled.achieved[k] < cfg.point_counts[k]) ++report.short_counts;
            per_n[k].push_back(evaluate(sampled.hints[k]));
          }
        }
      }
    }
  }

  for (const auto& m : cfg.methods) {
    for (Sampler s : cfg.samplers) {
      for (std::size_t k = 0; k < nc; ++k) {
        const auto& v = scores[m][s][k];
        const auto [mean, se] = mean_stderr(v);
        report.rows.push_back({m, to_string(s), cfg.point_counts[k], mean, se, static_cast<int>(v.size())});
      }
    }
  }
  return report;
}

}  // namespace hintcolor
