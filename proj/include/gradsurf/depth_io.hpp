#pragma once

#include <filesystem>
#include <vector>

#include "gradsurf/metrics.hpp"

namespace gradsurf {

// .png: 16-bit grayscale, millimeters. Anything else: the raw format
//   "GRADSURF-DEPTH v1\n", width i32, height i32, float32[w*h] meters, little endian.
DepthImage load_depth(const std::filesystem::path& path);
void save_depth(const DepthImage& depth, const std::filesystem::path& path);

// Header line "fx fy cx cy width height", then one line of 16 row-major
// floats (world-from-camera) per frame.
std::vector<CameraView> load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::vector<CameraView>& views, const std::filesystem::path& path);

}  // namespace gradsurf
