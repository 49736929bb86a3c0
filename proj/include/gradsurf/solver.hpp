#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradsurf/point_cloud.hpp"
#include "gradsurf/voxel_grid.hpp"

namespace gradsurf {

struct EnergyParams {
  double w0 = 4.0;  // screening weight
  double w1 = 1.0;  // gradient-fitting weight
  int band_radius = 3;
  double cg_tol = 1e-6;
  int cg_max_iters = 2000;
  std::vector<double> resolutions{0.16, 0.08, 0.04};  // coarse to fine, meters

  // Throws InvalidArgument.
  void validate() const;
};

// One level of the reconstruction. The screening points are viewed, not owned.
struct ReconstructionProblem {
  std::span<const Vec3> screen_points;  // set P
  SplatField grad_field;                // set Q splatted onto the grid
  VoxelGrid grid;                       // unknowns; chi is the current iterate
  EnergyParams params;
};

struct EnergyBreakdown {
  double screening = 0.0;  // w0 * sum chi(p)^2
  double gradient = 0.0;   // w1 * sum W |D chi - n|^2
  std::size_t skipped_points = 0;
  std::size_t skipped_voxels = 0;

  double total() const { return screening + gradient; }
};

// Direct evaluation through trilinear_eval and central_difference.
EnergyBreakdown energy(const ReconstructionProblem& prob);

// dE/dchi on every voxel of the grid (zero outside the band), assembled from
// the adjoints of trilinear sampling and central differencing.
std::vector<double> energy_gradient(const ReconstructionProblem& prob);

// The energy restricted to active voxels written as
//   E(x) = 1/2 x'Ax - b'x + c
// with A applied matrix-free. Unknowns are numbered in dense-index order.
class QuadraticForm {
 public:
  explicit QuadraticForm(const ReconstructionProblem& prob);

  std::size_t unknowns() const { return voxels_.size(); }
  std::span<const std::int64_t> voxels() const { return voxels_; }
  std::span<const double> rhs() const { return rhs_; }
  std::span<const double> diagonal() const { return diagonal_; }
  double constant() const { return constant_; }
  std::size_t skipped_points() const { return skipped_points_; }
  std::size_t skipped_voxels() const { return skipped_voxels_; }
  std::size_t screen_rows() const { return screen_.size(); }
  std::size_t gradient_rows() const { return grad_.size(); }

  // out = A x. Gather formulation, OpenMP-parallel, thread-count independent.
  void apply(std::span<const double> x, std::span<double> out) const;
  // out = A x by straightforward scatter; reference for apply().
  void apply_serial(std::span<const double> x, std::span<double> out) const;

  double energy(std::span<const double> x) const;

  std::vector<double> gather(std::span<const double> dense) const;
  void scatter(std::span<const double> x, std::span<double> dense) const;

 private:
  struct ScreenRow {
    std::array<std::int32_t, 8> idx;
    std::array<double, 8> w;
  };
  struct GradRow {
    std::array<std::int32_t, 6> nbr;  // -x, +x, -y, +y, -z, +z
    double weight;
    Vec3 normal_sum;
  };

  void apply_gradient_part(std::span<const double> x, std::span<double> out) const;

  double w0_ = 0.0, w1_ = 0.0, inv_2h_ = 0.0;
  std::vector<std::int64_t> voxels_;
  std::vector<ScreenRow> screen_;
  std::vector<GradRow> grad_;
  // Per unknown: gradient rows centered at its six face neighbors (or -1),
  // in the same -x,+x,-y,+y,-z,+z order.
  std::vector<std::array<std::int32_t, 6>> rows_around_;
  // CSR from unknown to (screen row * 8 + corner slot).
  std::vector<std::int64_t> screen_ptr_;
  std::vector<std::int64_t> screen_ref_;
  std::vector<double> rhs_;
  std::vector<double> diagonal_;
  double constant_ = 0.0;
  std::size_t skipped_points_ = 0, skipped_voxels_ = 0;
};

struct SolveResult {
  VoxelGrid grid;
  int iterations = 0;
  bool converged = false;  // false means NotConverged; grid holds the best iterate
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double relative_residual = 0.0;
  std::vector<double> energy_history;  // energy after each iteration, starting with init
  std::size_t unknowns = 0;
  std::size_t skipped_points = 0;
  std::size_t skipped_voxels = 0;
};

// Jacobi-preconditioned conjugate gradient on the active voxels. `init` is a
// dense chi field (zeros when absent). Stops when |grad E| / |grad E(init)|
// drops to cg_tol, or at once if the init residual is below 1e-12 |b|.
SolveResult solve_cg(const ReconstructionProblem& prob,
                     std::optional<std::span<const double>> init = std::nullopt);

// Trilinear resampling of a coarse solution at the fine voxel centers, using
// only active coarse corners (weights renormalized); zero where none is active.
std::vector<double> upsample(const VoxelGrid& coarse, const GridGeometry& fine);

struct LevelReport {
  double voxel_size = 0.0;
  Dims3 dims;
  std::size_t active_voxels = 0;
  int iterations = 0;
  bool converged = false;
  double start_energy = 0.0;  // energy of the (upsampled) initialization
  double final_energy = 0.0;
  double milliseconds = 0.0;
};

struct MultiresResult {
  VoxelGrid grid;  // finest level
  std::vector<LevelReport> levels;
  bool converged = true;
};

// Cloud bounds grown by band_radius + 2 voxels so the band fits inside the grid.
Aabb padded_bounds(const Aabb& cloud_bounds, int band_radius, double voxel_size);

// Coarse to fine: band from both clouds, splat grad_cloud, solve from the
// upsampled previous level (zeros at the coarsest). Each level gets its own
// grid covering the padded `bounds`.
MultiresResult solve_multires(const OrientedPointCloud& screen_cloud,
                              const OrientedPointCloud& grad_cloud, const EnergyParams& params,
                              const Aabb& bounds);

// Builds one level's problem on `geom` (band from both clouds, grad cloud splatted).
ReconstructionProblem make_problem(const OrientedPointCloud& screen_cloud,
                                   const OrientedPointCloud& grad_cloud, const GridGeometry& geom,
                                   const EnergyParams& params);

}  // namespace gradsurf
