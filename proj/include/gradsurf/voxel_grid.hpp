#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gradsurf/point_cloud.hpp"
#include "gradsurf/types.hpp"

namespace gradsurf {

// Placement of a regular grid. Values live at voxel centers; voxel (0,0,0)
// spans [origin, origin + voxel_size]^3.
struct GridGeometry {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 1.0;
  Dims3 dims;

  Vec3 center(int i, int j, int k) const {
    return origin + voxel_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  // Continuous index coordinates: voxel centers sit at integers.
  Vec3 to_index(const Vec3& p) const { return (p - origin) / voxel_size - Vec3::Constant(0.5); }
  bool same_as(const GridGeometry& o) const {
    return dims == o.dims && origin == o.origin && voxel_size == o.voxel_size;
  }
  void validate() const;
};

// Smallest grid with the given voxel size whose centers cover `box`.
GridGeometry geometry_covering(const Aabb& box, double voxel_size);

// Eight corner voxels and trilinear weights around a point.
struct TrilinearStencil {
  std::array<std::int64_t, 8> index{};
  std::array<double, 8> weight{};
};

// nullopt when p is outside the lattice of voxel centers. A point on the
// upper face is attached to the last cell with fractional weight 1.
std::optional<TrilinearStencil> trilinear_stencil(const GridGeometry& geom, const Vec3& p);

struct VoxelGrid {
  GridGeometry geom;
  std::vector<double> chi;          // implicit function, k-fastest
  std::vector<std::uint8_t> active;  // narrow band mask

  VoxelGrid() = default;
  explicit VoxelGrid(const GridGeometry& g)
      : geom(g), chi(std::size_t(g.dims.count()), 0.0), active(std::size_t(g.dims.count()), 0) {}

  const Dims3& dims() const { return geom.dims; }
  double voxel_size() const { return geom.voxel_size; }
  std::size_t size() const { return chi.size(); }
  std::size_t active_count() const;

  double& at(int i, int j, int k) { return chi[std::size_t(geom.dims.linear(i, j, k))]; }
  double at(int i, int j, int k) const { return chi[std::size_t(geom.dims.linear(i, j, k))]; }
  bool is_active(int i, int j, int k) const {
    return geom.dims.contains(i, j, k) && active[std::size_t(geom.dims.linear(i, j, k))] != 0;
  }
};

// Sum of splatted normals and of splat weights per voxel.
struct SplatField {
  GridGeometry geom;
  std::vector<Vec3> normal_sum;
  std::vector<double> weight_sum;
  std::size_t skipped = 0;  // points outside the grid

  SplatField() = default;
  explicit SplatField(const GridGeometry& g)
      : geom(g),
        normal_sum(std::size_t(g.dims.count()), Vec3::Zero()),
        weight_sum(std::size_t(g.dims.count()), 0.0) {}

  double total_weight() const;
};

// Trilinear splatting. The parallel path buckets points by cell and gathers
// per voxel, so its output does not depend on the thread count; it agrees
// with the serial scatter up to summation order.
SplatField splat(const OrientedPointCloud& cloud, const GridGeometry& geom);
SplatField splat_serial(const OrientedPointCloud& cloud, const GridGeometry& geom);

// Scalar splatting of `values` (the adjoint of trilinear sampling).
std::vector<double> splat_scalar(std::span<const Vec3> points, std::span<const double> values,
                                 const GridGeometry& geom);

// (dchi/dx, dchi/dy, dchi/dz) by central differences. Throws InactiveNeighbor
// if one of the six face neighbors is outside the band or the grid.
Vec3 central_difference(const VoxelGrid& grid, Index3 at);

// Voxels whose center lies within band_radius voxels (Chebyshev) of a point.
std::vector<std::uint8_t> build_band(const OrientedPointCloud& cloud, const GridGeometry& geom,
                                     int band_radius);

// Throws OutOfBounds or InactiveNeighbor (any of the 8 corners inactive).
double trilinear_eval(const VoxelGrid& grid, const Vec3& p);

// Binary grid hand-off format, little endian:
//   "GRADSURF-GRID v1\n", origin f64[3], voxel_size f64, dims i32[3],
//   chi f32[n] (k fastest), active mask packed LSB-first.
void save_grid(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid load_grid(const std::filesystem::path& path);

}  // namespace gradsurf
