#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hintcolor/colorspace.hpp"

namespace hintcolor {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetEntry {
  std::string file;  // relative to the manifest root
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;
  std::string content_hash;
  std::vector<std::string> skipped;  // corrupt, too small, or grayscale

  std::vector<std::filesystem::path> files(Split s) const;
  std::size_t count(Split s) const;
};

struct IngestOptions {
  int min_side = 64;
  // An image counts as grayscale when no pixel's channels differ by more than this.
  int gray_tolerance = 2;
};

/// Scans `dir` (non-recursive) for decodable color images. Files are ranked
/// by a hash of their name and split 80/10/10 in that order, so the split is
/// stable across runs and independent of directory listing order.
/// Throws on an empty directory or when no usable color image remains.
DatasetManifest ingest_dataset(const std::filesystem::path& dir, const IngestOptions& opts = {});

bool is_grayscale(const RgbImage& rgb, int tolerance = 2);

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Loads a manifest file, or ingests when given a directory.
DatasetManifest open_dataset(const std::filesystem::path& path);

}  // namespace hintcolor
