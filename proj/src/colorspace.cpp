#include "hintcolor/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "hintcolor/detail/fnv.hpp"

namespace hintcolor {
namespace {

// D65 reference white.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

struct LinearTable {
  std::array<double, 256> v{};
  LinearTable() {
    for (int i = 0; i < 256; ++i) v[i] = srgb_to_linear(i / 255.0);
  }
};

const LinearTable& linear_table() {
  static const LinearTable table;
  return table;
}

std::uint8_t to_byte(double c) {
  const double v = std::clamp(c, 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::lround(v));
}

std::vector<int> channel_samples(int stride) {
  if (stride < 1) throw std::invalid_argument("rgb_stride must be >= 1");
  std::vector<int> out;
  for (int v = 0; v < 256; v += stride) out.push_back(v);
  if (out.back() != 255) out.push_back(255);
  return out;
}

QuantizedGamut make_candidates(double grid_step, double ab_min, double ab_max) {
  if (!(grid_step > 0.0) || !(ab_max > ab_min)) {
    throw std::invalid_argument("invalid gamut grid");
  }
  const double n_real = (ab_max - ab_min) / grid_step;
  const int n = static_cast<int>(std::lround(n_real));
  if (std::abs(n_real - n) > 1e-9) {
    throw std::invalid_argument("grid_step must divide the ab range evenly");
  }
  QuantizedGamut g;
  g.grid_step = grid_step;
  g.ab_min = ab_min;
  g.ab_max = ab_max;
  g.candidate_centers.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      g.candidate_centers.push_back({ab_min + i * grid_step, ab_min + j * grid_step});
    }
  }
  g.in_gamut_mask.assign(g.candidate_centers.size(), false);
  return g;
}

// Calls fn(a, b) for every sampled sRGB color.
template <typename Fn>
void for_each_srgb_ab(int stride, Fn&& fn) {
  const auto samples = channel_samples(stride);
  for (int r : samples) {
    for (int g : samples) {
      for (int b : samples) {
        const Lab lab = srgb_to_lab(static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                    static_cast<std::uint8_t>(b));
        fn(lab.a, lab.b);
      }
    }
  }
}

}  // namespace

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto& lin = linear_table().v;
  const double rl = lin[r], gl = lin[g], bl = lin[b];
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / kXn), fy = lab_f(y / kYn), fz = lab_f(z / kZn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::array<double, 3> lab_to_srgb_unclipped(const Lab& lab) {
  const double fy = (lab.L + 16.0) / 116.0;
  const double fx = fy + lab.a / 500.0;
  const double fz = fy - lab.b / 200.0;
  const double x = kXn * lab_f_inv(fx);
  const double y = kYn * lab_f_inv(fy);
  const double z = kZn * lab_f_inv(fz);
  const double rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  // Negative linear values have no gamma-encoded counterpart; keep the sign so
  // callers can still detect them as out of gamut.
  auto enc = [](double c) { return c < 0.0 ? 12.92 * c : linear_to_srgb(c); };
  return {enc(rl), enc(gl), enc(bl)};
}

std::array<std::uint8_t, 3> lab_to_srgb8(const Lab& lab) {
  const auto c = lab_to_srgb_unclipped(lab);
  return {to_byte(c[0]), to_byte(c[1]), to_byte(c[2])};
}

LabImage rgb_to_lab(const RgbImage& rgb) {
  if (rgb.height <= 0 || rgb.width <= 0) throw std::invalid_argument("image has zero pixels");
  if (rgb.data.size() != rgb.pixels() * 3) {
    throw std::invalid_argument("expected 3 interleaved channels");
  }
  LabImage out{GrayImage(rgb.height, rgb.width), AbImage(rgb.height, rgb.width)};
  for (std::size_t i = 0; i < rgb.pixels(); ++i) {
    const Lab lab = srgb_to_lab(rgb.data[3 * i], rgb.data[3 * i + 1], rgb.data[3 * i + 2]);
    out.gray.L[i] = static_cast<float>(lab.L);
    out.ab.ab[2 * i] = static_cast<float>(lab.a);
    out.ab.ab[2 * i + 1] = static_cast<float>(lab.b);
  }
  return out;
}

RgbImage lab_to_rgb(const GrayImage& gray, const AbImage& ab) {
  if (gray.height != ab.height || gray.width != ab.width) {
    throw std::invalid_argument("lab_to_rgb: L and ab dimensions differ");
  }
  if (gray.L.size() != gray.pixels() || ab.ab.size() != ab.pixels() * 2) {
    throw std::invalid_argument("lab_to_rgb: malformed image buffers");
  }
  RgbImage out(gray.height, gray.width);
  for (std::size_t i = 0; i < gray.pixels(); ++i) {
    const auto c = lab_to_srgb8({gray.L[i], ab.ab[2 * i], ab.ab[2 * i + 1]});
    std::copy(c.begin(), c.end(), out.data.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return out;
}

double mean_saturation(const RgbImage& rgb) {
  if (rgb.pixels() == 0) throw std::invalid_argument("image has zero pixels");
  double sum = 0.0;
  for (std::size_t i = 0; i < rgb.pixels(); ++i) {
    const auto* p = &rgb.data[3 * i];
    const int mx = std::max({p[0], p[1], p[2]});
    const int mn = std::min({p[0], p[1], p[2]});
    if (mx > 0) sum += static_cast<double>(mx - mn) / mx;
  }
  return sum / static_cast<double>(rgb.pixels());
}

int QuantizedGamut::candidates_per_axis() const {
  return static_cast<int>(std::lround((ab_max - ab_min) / grid_step));
}

std::uint64_t QuantizedGamut::hash() const {
  detail::Fnv1a h;
  h.update_value(grid_step);
  h.update_value(ab_min);
  h.update_value(ab_max);
  for (std::size_t i = 0; i < candidate_centers.size(); ++i) {
    h.update_value(candidate_centers[i][0]);
    h.update_value(candidate_centers[i][1]);
    const unsigned char m = in_gamut_mask[i] ? 1 : 0;
    h.update_value(m);
  }
  return h.digest();
}

void finalize_gamut(QuantizedGamut& gamut) {
  if (gamut.in_gamut_mask.size() != gamut.candidate_centers.size()) {
    throw std::invalid_argument("gamut mask and candidate list differ in length");
  }
  gamut.centers.clear();
  for (std::size_t i = 0; i < gamut.candidate_centers.size(); ++i) {
    if (gamut.in_gamut_mask[i]) gamut.centers.push_back(gamut.candidate_centers[i]);
  }
}

QuantizedGamut build_gamut(double grid_step, double ab_min, double ab_max, GamutBuildOptions opts) {
  QuantizedGamut g = make_candidates(grid_step, ab_min, ab_max);
  const int n = g.candidates_per_axis();
  for_each_srgb_ab(opts.rgb_stride, [&](double a, double b) {
    const int i0 = std::max(0, static_cast<int>(std::ceil((a - grid_step - ab_min) / grid_step)));
    const int i1 = std::min(n - 1, static_cast<int>(std::floor((a + grid_step - ab_min) / grid_step)));
    const int j0 = std::max(0, static_cast<int>(std::ceil((b - grid_step - ab_min) / grid_step)));
    const int j1 = std::min(n - 1, static_cast<int>(std::floor((b + grid_step - ab_min) / grid_step)));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) g.in_gamut_mask[static_cast<std::size_t>(i) * n + j] = true;
    }
  });
  finalize_gamut(g);
  return g;
}

QuantizedGamut build_reference_gamut(int q, double grid_step, double ab_min, double ab_max,
                                     GamutBuildOptions opts) {
  QuantizedGamut g = make_candidates(grid_step, ab_min, ab_max);
  const int n = g.candidates_per_axis();
  if (q < 1 || q > n * n) throw std::invalid_argument("reference Q out of range");
  std::vector<double> dist(g.candidate_centers.size(), std::numeric_limits<double>::infinity());
  constexpr int kReach = 4;  // cells searched around each sample
  for_each_srgb_ab(opts.rgb_stride, [&](double a, double b) {
    const int ci = static_cast<int>(std::lround((a - ab_min) / grid_step));
    const int cj = static_cast<int>(std::lround((b - ab_min) / grid_step));
    for (int i = std::max(0, ci - kReach); i <= std::min(n - 1, ci + kReach); ++i) {
      for (int j = std::max(0, cj - kReach); j <= std::min(n - 1, cj + kReach); ++j) {
        const auto idx = static_cast<std::size_t>(i) * n + j;
        const double d = std::max(std::abs(a - g.candidate_centers[idx][0]),
                                  std::abs(b - g.candidate_centers[idx][1]));
        dist[idx] = std::min(dist[idx], d);
      }
    }
  });
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return dist[x] < dist[y]; });
  for (int k = 0; k < q; ++k) g.in_gamut_mask[order[k]] = true;
  finalize_gamut(g);
  return g;
}

std::string gamut_to_json(const QuantizedGamut& gamut) {
  nlohmann::json j;
  j["format"] = "gamut-v1";
  j["grid_step"] = gamut.grid_step;
  j["ab_min"] = gamut.ab_min;
  j["ab_max"] = gamut.ab_max;
  auto centers = nlohmann::json::array();
  auto mask = nlohmann::json::array();
  for (std::size_t i = 0; i < gamut.candidate_centers.size(); ++i) {
    centers.push_back({gamut.candidate_centers[i][0], gamut.candidate_centers[i][1]});
    mask.push_back(gamut.in_gamut_mask[i] ? 1 : 0);
  }
  j["centers"] = std::move(centers);
  j["mask"] = std::move(mask);
  j["Q"] = gamut.Q();
  return j.dump();
}

QuantizedGamut gamut_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "gamut-v1") throw std::runtime_error("not a gamut-v1 file");
  QuantizedGamut g;
  g.grid_step = j.at("grid_step").get<double>();
  g.ab_min = j.at("ab_min").get<double>();
  g.ab_max = j.at("ab_max").get<double>();
  for (const auto& c : j.at("centers")) g.candidate_centers.push_back({c.at(0), c.at(1)});
  for (const auto& m : j.at("mask")) g.in_gamut_mask.push_back(m.get<int>() != 0);
  finalize_gamut(g);
  if (g.Q() != j.at("Q").get<int>()) throw std::runtime_error("gamut file Q disagrees with mask");
  return g;
}

void save_gamut(const QuantizedGamut& gamut, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << gamut_to_json(gamut) << '\n';
}

QuantizedGamut load_gamut(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return gamut_from_json(ss.str());
}

void soft_encode_pixel(double a, double b, const QuantizedGamut& gamut, const SoftEncodeConfig& cfg,
                       float* out) {
  const int q = gamut.Q();
  if (!(cfg.sigma > 0.0) || cfg.neighbors < 1 || cfg.neighbors > q) {
    throw std::invalid_argument("invalid soft-encode config");
  }
  thread_local std::vector<std::pair<double, int>> d2;
  d2.resize(q);
  for (int k = 0; k < q; ++k) {
    const double da = a - gamut.centers[k][0];
    const double db = b - gamut.centers[k][1];
    d2[k] = {da * da + db * db, k};
  }
  std::partial_sort(d2.begin(), d2.begin() + cfg.neighbors, d2.end());
  std::fill(out, out + q, 0.f);
  // Shift by the nearest distance so far-away colors do not underflow.
  const double base = d2[0].first;
  const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  double total = 0.0;
  thread_local std::vector<double> weights;
  weights.resize(cfg.neighbors);
  for (int k = 0; k < cfg.neighbors; ++k) {
    weights[k] = std::exp(-(d2[k].first - base) * inv);
    total += weights[k];
  }
  for (int k = 0; k < cfg.neighbors; ++k) {
    out[d2[k].second] = static_cast<float>(weights[k] / total);
  }
}

ColorDistribution soft_encode(const AbImage& ab, const QuantizedGamut& gamut,
                              const SoftEncodeConfig& cfg) {
  ColorDistribution dist(ab.height, ab.width, gamut.Q());
  for (std::size_t i = 0; i < ab.pixels(); ++i) {
    soft_encode_pixel(ab.ab[2 * i], ab.ab[2 * i + 1], gamut, cfg,
                      &dist.probs[i * static_cast<std::size_t>(dist.bins)]);
  }
  return dist;
}

AbImage decode_expectation(const ColorDistribution& dist, const QuantizedGamut& gamut) {
  if (dist.bins != gamut.Q()) throw std::invalid_argument("distribution and gamut Q differ");
  AbImage out(dist.height, dist.width);
  for (std::size_t i = 0; i < dist.pixels(); ++i) {
    const float* p = &dist.probs[i * static_cast<std::size_t>(dist.bins)];
    double a = 0.0, b = 0.0;
    for (int k = 0; k < dist.bins; ++k) {
      a += p[k] * gamut.centers[k][0];
      b += p[k] * gamut.centers[k][1];
    }
    out.ab[2 * i] = static_cast<float>(a);
    out.ab[2 * i + 1] = static_cast<float>(b);
  }
  return out;
}

namespace {

// Bilinear resampling of an interleaved float buffer with half-pixel centers.
std::vector<float> resize_interleaved(const std::vector<float>& src, int h, int w, int channels,
                                      int oh, int ow) {
  if (h <= 0 || w <= 0 || oh <= 0 || ow <= 0) throw std::invalid_argument("resize: empty size");
  std::vector<float> dst(static_cast<std::size_t>(oh) * ow * channels);
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        auto px = [&](int yy, int xx) {
          return static_cast<double>(src[(static_cast<std::size_t>(yy) * w + xx) * channels + c]);
        };
        const double top = px(y0, x0) * (1 - tx) + px(y0, x1) * tx;
        const double bot = px(y1, x0) * (1 - tx) + px(y1, x1) * tx;
        dst[(static_cast<std::size_t>(y) * ow + x) * channels + c] =
            static_cast<float>(top * (1 - ty) + bot * ty);
      }
    }
  }
  return dst;
}

}  // namespace

AbImage resize_ab(const AbImage& ab, int height, int width) {
  AbImage out;
  out.height = height;
  out.width = width;
  out.ab = resize_interleaved(ab.ab, ab.height, ab.width, 2, height, width);
  return out;
}

GrayImage resize_gray(const GrayImage& gray, int height, int width) {
  GrayImage out;
  out.height = height;
  out.width = width;
  out.L = resize_interleaved(gray.L, gray.height, gray.width, 1, height, width);
  return out;
}

RgbImage resize_rgb(const RgbImage& rgb, int height, int width) {
  if (rgb.height == height && rgb.width == width) return rgb;
  cv::Mat src(rgb.height, rgb.width, CV_8UC3, const_cast<std::uint8_t*>(rgb.data.data()));
  cv::Mat dst;
  const bool shrinking = height < rgb.height && width < rgb.width;
  cv::resize(src, dst, cv::Size(width, height), 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  RgbImage out(height, width);
  std::copy(dst.datastart, dst.dataend, out.data.begin());
  return out;
}

namespace {

RgbImage from_bgr(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.rows, rgb.cols);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  std::copy(rgb.datastart, rgb.dataend, out.data.begin());
  return out;
}

cv::Mat to_bgr(const RgbImage& rgb) {
  cv::Mat src(rgb.height, rgb.width, CV_8UC3, const_cast<std::uint8_t*>(rgb.data.data()));
  cv::Mat bgr;
  cv::cvtColor(src, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

}  // namespace

RgbImage decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.empty()) throw std::runtime_error("empty image data");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("undecodable image data");
  return from_bgr(bgr);
}

RgbImage read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode " + path.string());
  return from_bgr(bgr);
}

void write_png(const RgbImage& rgb, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), to_bgr(rgb))) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

std::vector<std::uint8_t> encode_png(const RgbImage& rgb) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_bgr(rgb), buf)) throw std::runtime_error("png encoding failed");
  return buf;
}

}  // namespace hintcolor
