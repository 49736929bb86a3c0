#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <filesystem>
#include <vector>

#include "gradsurf/mesh.hpp"

namespace gradsurf {

struct CameraView {
  Mat3 intrinsics = Mat3::Identity();  // pixels
  Mat4 pose = Mat4::Identity();        // world from camera
  int width = 0;
  int height = 0;

  void validate() const;
};

// Metric depth per pixel, row-major, 0 where invalid.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), values(std::size_t(w) * h, 0.0) {}
  double& at(int x, int y) { return values[std::size_t(y) * width + x]; }
  double at(int x, int y) const { return values[std::size_t(y) * width + x]; }
};

struct MetricsReport3D {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
  double threshold = 0.0;
};

struct MetricsReport2D {
  double abs_rel = 0.0;
  double abs_diff = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  std::size_t valid_pixels = 0;
};

inline constexpr double kDefaultFscoreThreshold = 0.05;
inline constexpr std::size_t kDefaultSamplesPerMesh = 200000;

double fscore(double precision, double recall);

// Fraction of `from` points within `threshold` of their nearest `to` point.
double fraction_within(std::span<const Vec3> from, std::span<const Vec3> to, double threshold);

// Area-uniform samples on both meshes; exact nearest neighbors.
MetricsReport3D eval_3d(const TriangleMesh& pred, const TriangleMesh& gt,
                        double threshold = kDefaultFscoreThreshold,
                        std::size_t samples_per_mesh = kDefaultSamplesPerMesh,
                        std::uint64_t seed = 0);

// Depth along the camera z axis of the nearest hit through each pixel center.
DepthImage render_depth(const TriangleMesh& mesh, const CameraView& view);
DepthImage render_depth_brute_force(const TriangleMesh& mesh, const CameraView& view);

// Over pixels valid in both images. Throws NoValidPixels.
MetricsReport2D eval_2d(const DepthImage& pred, const DepthImage& gt);

// For every source vertex, the sum of distances to its k nearest target vertices.
std::vector<double> error_heatmap(const TriangleMesh& source, const TriangleMesh& target, int k);
std::vector<double> error_heatmap_brute_force(const TriangleMesh& source,
                                              const TriangleMesh& target, int k);

// Blue (0) to red (95th percentile and above).
std::vector<std::array<std::uint8_t, 3>> heat_colors(std::span<const double> values);

// Binary PLY with x,y,z float64, red,green,blue uchar and a per-vertex error property.
void save_heatmap_ply(const TriangleMesh& mesh, std::span<const double> values,
                      const std::filesystem::path& path);

}  // namespace gradsurf
