#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hintcolor/colorspace.hpp"

namespace hintcolor {

using Rng = std::mt19937_64;

// Sparse user colors plus the reveal mask. mask==0 implies ab==(0,0).
struct LocalHints {
  int height = 0;
  int width = 0;
  std::vector<float> ab;    // interleaved (a,b)
  std::vector<float> mask;  // exactly 0 or 1

  LocalHints() = default;
  LocalHints(int h, int w)
      : height(h),
        width(w),
        ab(static_cast<std::size_t>(h) * w * 2, 0.f),
        mask(static_cast<std::size_t>(h) * w, 0.f) {}

  std::size_t pixels() const { return mask.size(); }
  std::size_t revealed() const;
  bool consistent() const;

  void reveal(int y, int x, float a, float b) {
    const auto i = static_cast<std::size_t>(y) * width + x;
    mask[i] = 1.f;
    ab[2 * i] = a;
    ab[2 * i + 1] = b;
  }
};

// Whole-image color statistics with reveal flags. Unrevealed slots are zero.
struct GlobalHints {
  std::vector<float> histogram;  // length Q
  float hist_flag = 0.f;
  float saturation = 0.f;
  float sat_flag = 0.f;

  /// Flattened network input of width Q+3: histogram, hist flag, saturation, sat flag.
  std::vector<float> packed() const;
};

struct SimConfig {
  double geometric_p = 1.0 / 8.0;
  double full_reveal_prob = 0.01;
  int patch_min = 1;
  int patch_max = 9;
};

// Square patch bounds clipped to the image, half-open on the high side.
struct PatchRect {
  int y0, x0, y1, x1;
  bool empty() const { return y1 <= y0 || x1 <= x0; }
  bool overlaps(const PatchRect& o) const {
    return y0 < o.y1 && o.y0 < y1 && x0 < o.x1 && o.x0 < x1;
  }
};

/// Odd sizes are centered on (cy,cx); even sizes anchor their top-left there.
PatchRect patch_rect(int cy, int cx, int size, int height, int width);

/// Mean ab of `target` over the patch.
std::array<float, 2> patch_mean(const AbImage& target, const PatchRect& r);

/// Reveals the patch mean of `target` over r in `hints`.
void reveal_patch_mean(LocalHints& hints, const AbImage& target, const PatchRect& r);

/// Number of simulated points, geometric on {0,1,...} with mean (1-p)/p.
int sample_point_count(const SimConfig& cfg, Rng& rng);

/// Training-time point simulation: geometric point count on {0,1,...},
/// Gaussian locations around the image center, uniform patch sizes.
LocalHints simulate_local_hints(const AbImage& target, const SimConfig& cfg, Rng& rng);

/// Histogram is the mean soft-encoding of the quarter-resolution ab image.
GlobalHints compute_global_hints(const RgbImage& rgb, const QuantizedGamut& gamut, bool reveal_hist,
                                 bool reveal_sat);

/// Same, starting from an already converted Lab image.
GlobalHints compute_global_hints(const LabImage& lab, const RgbImage& rgb,
                                 const QuantizedGamut& gamut, bool reveal_hist, bool reveal_sat);

/// Training-time reveal: histogram and saturation each kept with probability 1/2.
GlobalHints simulate_global_hints(const GlobalHints& full, Rng& rng);

struct PointEdit {
  int x = 0;
  int y = 0;
  float a = 0.f;
  float b = 0.f;
  int size = 3;

  bool operator==(const PointEdit&) const = default;
};

class EditOutOfBounds : public std::out_of_range {
 public:
  EditOutOfBounds(std::size_t index, const std::string& what)
      : std::out_of_range(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Paints each edit's patch in list order; later edits overwrite earlier ones.
/// Throws EditOutOfBounds naming the first offending edit.
LocalHints hints_from_edits(const std::vector<PointEdit>& edits, int height, int width);

void validate_edits(const std::vector<PointEdit>& edits, int height, int width);

// JSON array of {x, y, a, b, size}.
std::string edits_to_json(const std::vector<PointEdit>& edits);
std::vector<PointEdit> edits_from_json(const std::string& text);

}  // namespace hintcolor
