#include "hintcolor/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hintcolor/detail/fnv.hpp"
#include "hintcolor/model.hpp"

namespace hintcolor {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split: " + s);
}

std::vector<fs::path> DatasetManifest::files(Split s) const {
  std::vector<fs::path> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(root / e.file);
  }
  return out;
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [s](const DatasetEntry& e) { return e.split == s; }));
}

bool is_grayscale(const RgbImage& rgb, int tolerance) {
  for (std::size_t i = 0; i < rgb.pixels(); ++i) {
    const auto* p = &rgb.data[3 * i];
    const int mx = std::max({p[0], p[1], p[2]});
    const int mn = std::min({p[0], p[1], p[2]});
    if (mx - mn > tolerance) return false;
  }
  return true;
}

DatasetManifest ingest_dataset(const fs::path& dir, const IngestOptions& opts) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (de.is_regular_file()) names.push_back(de.path().filename().string());
  }
  if (names.empty()) throw std::runtime_error("empty dataset directory: " + dir.string());
  std::sort(names.begin(), names.end());

  DatasetManifest m;
  m.root = fs::absolute(dir);
  detail::Fnv1a content;
  std::vector<std::string> usable;
  std::size_t grayscale = 0;
  for (const auto& name : names) {
    std::ifstream in(dir / name, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RgbImage rgb;
    try {
      rgb = decode_image(bytes);
    } catch (const std::exception&) {
      m.skipped.push_back(name);
      continue;
    }
    if (std::min(rgb.height, rgb.width) < opts.min_side) {
      m.skipped.push_back(name);
      continue;
    }
    if (is_grayscale(rgb, opts.gray_tolerance)) {
      m.skipped.push_back(name);
      ++grayscale;
      continue;
    }
    content.update(name);
    content.update(bytes.data(), bytes.size());
    usable.push_back(name);
  }
  if (usable.empty()) {
    throw std::runtime_error(grayscale > 0 ? "dataset has no color images (all grayscale or unusable)"
                                           : "dataset has no decodable images");
  }
  m.content_hash = hex64(content.digest());

  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  for (const auto& n : usable) ranked.emplace_back(detail::fnv1a(n), n);
  std::sort(ranked.begin(), ranked.end());
  const std::size_t n = ranked.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = (n * 9 / 10) - n_train;
  for (std::size_t i = 0; i < n; ++i) {
    const Split s = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    m.entries.push_back({ranked[i].second, s});
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.file < b.file; });
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : m.entries) entries.push_back({{"file", e.file}, {"split", to_string(e.split)}});
  json j{{"format", "dataset-v1"},
         {"root", m.root.string()},
         {"content_hash", m.content_hash},
         {"entries", entries},
         {"skipped", m.skipped}};
  std::ofstream out(path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const json j = json::parse(in);
  if (j.value("format", "") != "dataset-v1") throw std::runtime_error("not a dataset manifest: " + path.string());
  DatasetManifest m;
  m.root = j.at("root").get<std::string>();
  m.content_hash = j.at("content_hash").get<std::string>();
  for (const auto& e : j.at("entries")) {
    m.entries.push_back({e.at("file").get<std::string>(), split_from_string(e.at("split").get<std::string>())});
  }
  m.skipped = j.value("skipped", std::vector<std::string>{});
  return m;
}

DatasetManifest open_dataset(const fs::path& path) {
  return fs::is_directory(path) ? ingest_dataset(path) : load_manifest(path);
}

}  // namespace hintcolor
