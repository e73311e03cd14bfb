#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hintcolor {

// 8-bit interleaved RGB.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::uint8_t* at(int y, int x) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int y, int x) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool operator==(const RgbImage&) const = default;
};

// CIE L channel, values in [0,100].
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<float> L;

  GrayImage() = default;
  GrayImage(int h, int w, float fill = 0.f)
      : height(h), width(w), L(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixels() const { return L.size(); }
  float& at(int y, int x) { return L[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return L[static_cast<std::size_t>(y) * width + x]; }
};

// Interleaved (a,b) chrominance, each channel in [-110,110].
struct AbImage {
  int height = 0;
  int width = 0;
  std::vector<float> ab;

  AbImage() = default;
  AbImage(int h, int w) : height(h), width(w), ab(static_cast<std::size_t>(h) * w * 2, 0.f) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  float* at(int y, int x) { return &ab[(static_cast<std::size_t>(y) * width + x) * 2]; }
  const float* at(int y, int x) const { return &ab[(static_cast<std::size_t>(y) * width + x) * 2]; }
};

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// sRGB (D65) to CIE Lab for a single 8-bit color.
Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// CIE Lab to gamma-encoded sRGB in [0,1] without clipping. Values outside
/// [0,1] mean the color is outside the sRGB gamut.
std::array<double, 3> lab_to_srgb_unclipped(const Lab& lab);

/// CIE Lab to 8-bit sRGB, clipping each channel.
std::array<std::uint8_t, 3> lab_to_srgb8(const Lab& lab);

struct LabImage {
  GrayImage gray;
  AbImage ab;
};

/// Throws std::invalid_argument on an empty image or a data size that is not
/// height*width*3.
LabImage rgb_to_lab(const RgbImage& rgb);

/// Out-of-gamut values are clipped per channel in RGB. Throws
/// std::invalid_argument on dimension mismatch.
RgbImage lab_to_rgb(const GrayImage& gray, const AbImage& ab);

/// Spatial mean of the HSV saturation channel, in [0,1].
double mean_saturation(const RgbImage& rgb);

// The ab plane tiled by square bins; only bins reachable by sRGB colors are kept.
struct QuantizedGamut {
  double grid_step = 10.0;
  double ab_min = -110.0;
  double ab_max = 110.0;
  std::vector<std::array<double, 2>> candidate_centers;  // row-major over (a, b)
  std::vector<bool> in_gamut_mask;
  // Centers of the in-gamut bins, in candidate order. size() == Q.
  std::vector<std::array<double, 2>> centers;

  int Q() const { return static_cast<int>(centers.size()); }
  int candidates_per_axis() const;

  /// Stable 64-bit digest of the grid and mask, stored in checkpoints.
  std::uint64_t hash() const;
};

struct GamutBuildOptions {
  // Sampling stride over each 8-bit sRGB channel.
  int rgb_stride = 2;
};

/// Candidate centers are ab_min + k*grid_step for k = 0..n-1, n = range/step.
/// A candidate is in-gamut iff some sampled sRGB color lies within Chebyshev
/// distance grid_step of its center.
QuantizedGamut build_gamut(double grid_step = 10.0, double ab_min = -110.0, double ab_max = 110.0,
                           GamutBuildOptions opts = {});

/// Same candidate grid, but keeps exactly `q` candidates: those closest (Chebyshev)
/// to the sampled sRGB gamut, ties broken by candidate index.
QuantizedGamut build_reference_gamut(int q = 313, double grid_step = 10.0, double ab_min = -110.0,
                                     double ab_max = 110.0, GamutBuildOptions opts = {});

/// Rebuilds `centers` from candidate_centers and in_gamut_mask.
void finalize_gamut(QuantizedGamut& gamut);

// "gamut-v1" JSON file.
void save_gamut(const QuantizedGamut& gamut, const std::filesystem::path& path);
QuantizedGamut load_gamut(const std::filesystem::path& path);
std::string gamut_to_json(const QuantizedGamut& gamut);
QuantizedGamut gamut_from_json(const std::string& text);

struct SoftEncodeConfig {
  double sigma = 5.0;
  int neighbors = 10;
};

// Per-pixel probability simplex over the Q in-gamut bins.
struct ColorDistribution {
  int height = 0;
  int width = 0;
  int bins = 0;
  std::vector<float> probs;  // (height*width) x bins

  ColorDistribution() = default;
  ColorDistribution(int h, int w, int q)
      : height(h), width(w), bins(q), probs(static_cast<std::size_t>(h) * w * q, 0.f) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  float* row(int y, int x) { return &probs[(static_cast<std::size_t>(y) * width + x) * bins]; }
  const float* row(int y, int x) const {
    return &probs[(static_cast<std::size_t>(y) * width + x) * bins];
  }
};

/// Soft-encodes one ab pair into `out` (length Q). Weights on the
/// cfg.neighbors nearest centers follow a Gaussian kernel in ab distance.
void soft_encode_pixel(double a, double b, const QuantizedGamut& gamut, const SoftEncodeConfig& cfg,
                       float* out);

ColorDistribution soft_encode(const AbImage& ab, const QuantizedGamut& gamut,
                              const SoftEncodeConfig& cfg = {});

/// Probability-weighted mean of bin centers per pixel.
AbImage decode_expectation(const ColorDistribution& dist, const QuantizedGamut& gamut);

/// Bilinear resize of an ab image (half-pixel centers, edge clamped).
AbImage resize_ab(const AbImage& ab, int height, int width);
GrayImage resize_gray(const GrayImage& gray, int height, int width);
RgbImage resize_rgb(const RgbImage& rgb, int height, int width);

// Image file helpers backed by OpenCV codecs.
RgbImage decode_image(const std::vector<std::uint8_t>& bytes);
RgbImage read_image(const std::filesystem::path& path);
void write_png(const RgbImage& rgb, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RgbImage& rgb);

}  // namespace hintcolor
