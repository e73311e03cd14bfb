#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hintcolor/colorspace.hpp"
#include "hintcolor/hints.hpp"

namespace hintcolor {

// Value reported for identical images, where MSE is zero.
inline constexpr double kPsnrCap = 99.0;

/// PSNR in dB over all pixels and channels of two 8-bit RGB images.
double psnr(const RgbImage& reference, const RgbImage& test);

/// Any (gray, hints) -> ab colorization method.
using Colorizer = std::function<AbImage(const GrayImage&, const LocalHints&)>;

enum class Sampler { kRandom, kMaxError };

std::string to_string(Sampler s);
Sampler sampler_from_string(const std::string& s);

struct BenchConfig {
  std::vector<int> point_counts{0, 1, 2, 5, 10, 20, 50, 100, 200, 500};
  std::vector<Sampler> samplers{Sampler::kRandom, Sampler::kMaxError};
  int reveal_patch = 7;
  int error_window = 25;
  int trials_per_image = 1;
  std::uint64_t seed = 0;
  // Method names, e.g. "network_local", "levin", "gray".
  std::vector<std::string> methods{"gray"};
};

void validate(const BenchConfig& cfg);

/// Patch centers whose full reveal patch fits inside the image (all pixels
/// when the image is smaller than the patch).
std::vector<std::pair<int, int>> valid_patch_centers(int height, int width, int patch);

/// n uniformly drawn patch centers, each revealing its patch-mean ab; later
/// patches overwrite earlier ones.
LocalHints sample_random_points(const AbImage& target, int n, int patch, Rng& rng);

struct MaxErrorResult {
  // hints[k] holds the first point_counts[k] points (or fewer if short).
  std::vector<LocalHints> hints;
  std::vector<int> achieved;
  bool short_count = false;
};

/// Incremental oracle sampling: repeatedly reveals the non-overlapping patch
/// at the largest window-averaged ab error of the current colorization.
/// Snapshots are taken at each requested count, so larger counts extend
/// smaller ones.
MaxErrorResult sample_max_error_points(const AbImage& target, const GrayImage& gray,
                                       const Colorizer& colorizer, const std::vector<int>& counts,
                                       const BenchConfig& cfg);

/// Single-count convenience form. `short_count` is set when fewer than n
/// non-overlapping positions were available.
LocalHints sample_max_error_points(const AbImage& target, const GrayImage& gray,
                                   const Colorizer& colorizer, int n, const BenchConfig& cfg,
                                   bool* short_count = nullptr, int* achieved = nullptr);

struct BenchRow {
  std::string method;
  std::string sampler;
  int n = 0;
  double psnr_mean = 0.0;
  double psnr_stderr = 0.0;
  int images = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::string dataset_hash;
  int skipped_images = 0;
  // Number of (image, n) cases where max-error sampling ran short.
  int short_counts = 0;

  const BenchRow* find(const std::string& method, const std::string& sampler, int n) const;
  std::string to_csv() const;
};

inline constexpr const char* kBenchCsvHeader = "method,sampler,n,psnr_mean,psnr_stderr,images";

struct BenchImage {
  std::string name;
  RgbImage rgb;
};

/// Runs every (method, sampler, n) combination over the images. Throws
/// std::invalid_argument when a requested method is missing from `methods`.
BenchReport run_benchmark(const std::vector<BenchImage>& images, const BenchConfig& cfg,
                          const std::map<std::string, Colorizer>& methods);

/// Colorizer that ignores hints and predicts ab = 0.
Colorizer gray_colorizer();

/// Mean and standard error of the mean.
std::pair<double, double> mean_stderr(const std::vector<double>& values);

}  // namespace hintcolor
