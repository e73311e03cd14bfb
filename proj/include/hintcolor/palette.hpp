#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hintcolor/colorspace.hpp"

namespace hintcolor {

struct PaletteEntry {
  double a = 0.0;
  double b = 0.0;
  double weight = 0.0;
};

// Ranked color suggestions for one pixel; weights sum to 1, nonincreasing.
struct PaletteSuggestion {
  std::vector<PaletteEntry> entries;
};

struct PaletteConfig {
  int K = 9;
  // Probabilities are raised to this power before clustering.
  double temperature = 0.5;
  double merge_radius = 10.0;
  int kmeans_restarts = 4;
  std::uint64_t seed = 0;
};

struct PixelQuery {
  int y = 0;
  int x = 0;
  // Full-resolution image size the query coordinates refer to.
  int image_height = 0;
  int image_width = 0;
};

/// Suggested colors at one pixel from a (quarter-resolution) distribution.
/// Throws std::invalid_argument if the distribution row is empty or not finite.
PaletteSuggestion suggest_colors(const ColorDistribution& dist, const PixelQuery& pixel,
                                 double L_at_pixel, const QuantizedGamut& gamut,
                                 const PaletteConfig& cfg = {});

/// Same, for a single probability vector over the gamut bins.
PaletteSuggestion suggest_colors(const float* probs, double L_at_pixel, const QuantizedGamut& gamut,
                                 const PaletteConfig& cfg = {});

/// True when (L,a,b) maps into sRGB without clipping.
bool in_srgb_gamut(double L, double a, double b);

/// Grid of ab pairs with the given spacing over [-110,110]^2 that are
/// displayable at lightness L.
std::vector<std::array<double, 2>> gamut_slice(double L, double resolution = 1.0);

/// Nearest ab (Euclidean) on the resolution-1 slice at L.
std::array<double, 2> nearest_in_slice(double L, double a, double b);

/// "#rrggbb" for the color (L,a,b) after clipping.
std::string rgb_hex(double L, double a, double b);

// JSON array of {a, b, weight, rgb_hex_at_L}.
std::string suggestion_to_json(const PaletteSuggestion& s, double L,
                               const std::string& hex_key = "rgb_hex_at_L");

}  // namespace hintcolor
