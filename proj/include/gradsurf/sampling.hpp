#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "gradsurf/mesh.hpp"
#include "gradsurf/point_cloud.hpp"

namespace gradsurf {

enum class SamplingStrategy { Vertex, Area, PoissonDisk, Curvature };

struct SamplerConfig {
  SamplingStrategy strategy = SamplingStrategy::Area;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  double disk_radius = 0.0;  // poisson_disk only; <= 0 derives it from the mesh area
};

struct PoissonDiskResult {
  OrientedPointCloud cloud;
  bool radius_too_large = false;  // fewer than count/2 accepted within the budget
  std::size_t candidates = 0;
};

// Point and normal at barycentric parameters (r1, r2) of face `f`:
// P = (1 - sqrt r1) A + sqrt r1 (1 - r2) B + sqrt r1 r2 C, same weights for N.
// The normal is renormalized; falls back to the face normal if the blend vanishes.
std::pair<Vec3, Vec3> point_in_face(const TriangleMesh& mesh, std::size_t f, double r1, double r2);

// Index of the face selected by u in [0, total) against an inclusive prefix sum.
std::size_t select_by_cumulative(std::span<const double> cumulative, double u);

OrientedPointCloud sample_vertices(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);
OrientedPointCloud sample_area(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);
OrientedPointCloud sample_curvature(const TriangleMesh& mesh, std::size_t count,
                                    std::uint64_t seed);
PoissonDiskResult sample_poisson_disk(const TriangleMesh& mesh, std::size_t count, double radius,
                                      std::uint64_t seed);

// sqrt(total_area / (2 count)).
double default_disk_radius(const TriangleMesh& mesh, std::size_t count);

// Dispatch on config.strategy. Poisson-disk shortfalls are logged, not thrown.
OrientedPointCloud sample(const TriangleMesh& mesh, const SamplerConfig& config);

SamplingStrategy parse_strategy(std::string_view name);

}  // namespace gradsurf
