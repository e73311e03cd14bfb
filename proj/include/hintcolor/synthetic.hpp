#pragma once

#include <cstdint>
#include <filesystem>

#include "hintcolor/colorspace.hpp"

namespace hintcolor {

// Procedural outdoor-like scenes: sky and ground with a horizon, a few
// textured objects, and an image-wide chroma scale so that saturation and
// palette vary between images. Used where no photo corpus is available.
struct SceneOptions {
  int height = 128;
  int width = 128;
  int min_objects = 2;
  int max_objects = 5;
};

RgbImage generate_scene(std::uint64_t seed, const SceneOptions& opts = {});

/// Writes `count` PNG scenes named scene_00000.png, ... into `dir`.
void write_synthetic_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed,
                             const SceneOptions& opts = {});

}  // namespace hintcolor
