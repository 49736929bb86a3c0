#pragma once

// Fixtures and reference implementations shared by the unit and acceptance suites.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "gradsurf/mesh.hpp"
#include "gradsurf/point_cloud.hpp"
#include "gradsurf/solver.hpp"
#include "gradsurf/voxel_grid.hpp"

namespace gradsurf::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("gradsurf-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Points drawn uniformly on an analytic sphere, normals radial.
inline OrientedPointCloud sphere_cloud(const Vec3& center, double radius, std::size_t n,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OrientedPointCloud c;
  c.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 u = random_unit(rng);
    c.push_back(center + radius * u, u);
  }
  return c;
}

// Upper tail probability of Pearson's statistic for observed vs expected counts.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0;
  int dof = -1;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) continue;
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    ++dof;
  }
  if (dof < 1) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

// Two triangles in the z=0 plane whose areas are in ratio `ratio`:1.
inline TriangleMesh two_triangles(double ratio) {
  TriangleMesh m;
  m.vertices = {{0, 0, 0}, {ratio, 0, 0}, {0, 1, 0}, {0, 0, 0}, {-1, 0, 0}, {0, -1, 0}};
  m.faces = {{0, 1, 2}, {3, 5, 4}};
  m.vertex_normals.assign(6, Vec3::UnitZ());
  return m;
}

// A fully active grid with random chi, random screening points and a random
// splatted normal field.
struct RandomProblem {
  std::vector<Vec3> screen;
  ReconstructionProblem prob;
};

inline RandomProblem random_problem(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GridGeometry g;
  g.origin = random_vec(rng, -1.0, 1.0);
  g.voxel_size = uniform(rng, 0.05, 0.5);
  g.dims = {n, n, n};
  const Vec3 lo = g.center(0, 0, 0);
  const double span = g.voxel_size * (n - 1);

  RandomProblem rp;
  for (int i = 0; i < 40; ++i) rp.screen.push_back(lo + random_vec(rng, 0.0, span));
  OrientedPointCloud q;
  for (int i = 0; i < 60; ++i) q.push_back(lo + random_vec(rng, 0.0, span), random_unit(rng));

  rp.prob.grad_field = splat_serial(q, g);
  rp.prob.grid = VoxelGrid(g);
  std::fill(rp.prob.grid.active.begin(), rp.prob.grid.active.end(), std::uint8_t(1));
  for (auto& c : rp.prob.grid.chi) c = uniform(rng, -1.0, 1.0);
  rp.prob.params.w0 = uniform(rng, 0.5, 5.0);
  rp.prob.params.w1 = uniform(rng, 0.5, 2.0);
  return rp;
}

inline void bind(RandomProblem& rp) { rp.prob.screen_points = rp.screen; }

// Independent energy evaluator: plain loops over the definition, no shared
// code with the solver beyond the data types.
inline double naive_energy(const ReconstructionProblem& prob) {
  const auto& g = prob.grid.geom;
  const auto& d = g.dims;
  auto chi = [&](int i, int j, int k) { return prob.grid.chi[std::size_t((std::int64_t(i) * d.ny + j) * d.nz + k)]; };
  auto act = [&](int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < d.nx && j < d.ny && k < d.nz &&
           prob.grid.active[std::size_t((std::int64_t(i) * d.ny + j) * d.nz + k)] != 0;
  };
  double screening = 0.0;
  for (const Vec3& p : prob.screen_points) {
    const Vec3 u = (p - g.origin) / g.voxel_size - Vec3::Constant(0.5);
    int b[3];
    double f[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const int n = a == 0 ? d.nx : a == 1 ? d.ny : d.nz;
      if (u[a] < 0.0 || u[a] > n - 1) inside = false;
      b[a] = std::min(int(std::floor(u[a])), n - 2);
      f[a] = u[a] - b[a];
    }
    if (!inside) continue;
    double v = 0.0;
    bool ok = true;
    for (int dx = 0; dx < 2; ++dx) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dz = 0; dz < 2; ++dz) {
          if (!act(b[0] + dx, b[1] + dy, b[2] + dz)) ok = false;
          const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
          v += w * chi(b[0] + dx, b[1] + dy, b[2] + dz);
        }
      }
    }
    if (ok) screening += v * v;
  }
  double gradient = 0.0;
  for (int i = 0; i < d.nx; ++i) {
    for (int j = 0; j < d.ny; ++j) {
      for (int k = 0; k < d.nz; ++k) {
        const std::size_t idx = std::size_t((std::int64_t(i) * d.ny + j) * d.nz + k);
        const double w = prob.grad_field.weight_sum[idx];
        if (!act(i, j, k) || !(w > 0.0)) continue;
        if (!act(i - 1, j, k) || !act(i + 1, j, k) || !act(i, j - 1, k) || !act(i, j + 1, k) ||
            !act(i, j, k - 1) || !act(i, j, k + 1)) {
          continue;
        }
        const Vec3 grad((chi(i + 1, j, k) - chi(i - 1, j, k)) / (2 * g.voxel_size),
                        (chi(i, j + 1, k) - chi(i, j - 1, k)) / (2 * g.voxel_size),
                        (chi(i, j, k + 1) - chi(i, j, k - 1)) / (2 * g.voxel_size));
        gradient += w * (grad - prob.grad_field.normal_sum[idx] / w).squaredNorm();
      }
    }
  }
  return prob.params.w0 * screening + prob.params.w1 * gradient;
}

// Relative L-infinity error of the analytic gradient against central finite
// differences of the naive energy, over active voxels.
inline double gradient_check_error(ReconstructionProblem prob, const std::vector<double>& analytic) {
  double scale = 0.0;
  for (double c : prob.grid.chi) scale = std::max(scale, std::abs(c));
  const double h = 1e-5 * std::max(scale, 1.0);
  double max_err = 0.0, max_ref = 0.0;
  for (std::size_t i = 0; i < prob.grid.chi.size(); ++i) {
    if (!prob.grid.active[i]) continue;
    const double c0 = prob.grid.chi[i];
    prob.grid.chi[i] = c0 + h;
    const double ep = naive_energy(prob);
    prob.grid.chi[i] = c0 - h;
    const double em = naive_energy(prob);
    prob.grid.chi[i] = c0;
    const double fd = (ep - em) / (2 * h);
    max_err = std::max(max_err, std::abs(fd - analytic[i]));
    max_ref = std::max(max_ref, std::abs(fd));
  }
  return max_err / std::max(max_ref, 1e-300);
}

// Known-solution fixture on a fully active n^3 grid: chi_star is a smooth
// field, the normal targets are its central differences (so the gradient term
// vanishes at chi_star) and the screening points are sign changes along grid
// edges, where the trilinear interpolant of chi_star is exactly zero.
struct KnownSolution {
  std::vector<Vec3> screen;
  ReconstructionProblem prob;
  std::vector<double> chi_star;
  std::vector<std::uint8_t> in_gradient_rows;  // voxel appears in some gradient row
};

inline KnownSolution known_solution(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GridGeometry g;
  g.origin = Vec3::Zero();
  g.voxel_size = 0.1;
  g.dims = {n, n, n};
  const double mid = 0.5 * n * g.voxel_size;
  const Vec3 a = random_unit(rng);
  const double wobble = uniform(rng, 0.05, 0.15);

  KnownSolution ks;
  ks.chi_star.resize(std::size_t(g.dims.count()));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Vec3 c = g.center(i, j, k) - Vec3::Constant(mid);
        ks.chi_star[std::size_t(g.dims.linear(i, j, k))] =
            a.dot(c) + wobble * std::sin(3.0 * c.x()) * std::cos(2.0 * c.y()) + 0.5 * wobble * c.z() * c.z();
      }
    }
  }
  auto chi = [&](int i, int j, int k) { return ks.chi_star[std::size_t(g.dims.linear(i, j, k))]; };

  SplatField field(g);
  ks.in_gradient_rows.assign(std::size_t(g.dims.count()), 0);
  for (int i = 1; i + 1 < n; ++i) {
    for (int j = 1; j + 1 < n; ++j) {
      for (int k = 1; k + 1 < n; ++k) {
        const auto idx = std::size_t(g.dims.linear(i, j, k));
        const double w = uniform(rng, 0.5, 2.0);
        const Vec3 d((chi(i + 1, j, k) - chi(i - 1, j, k)) / (2 * g.voxel_size),
                     (chi(i, j + 1, k) - chi(i, j - 1, k)) / (2 * g.voxel_size),
                     (chi(i, j, k + 1) - chi(i, j, k - 1)) / (2 * g.voxel_size));
        field.weight_sum[idx] = w;
        field.normal_sum[idx] = w * d;
        ks.in_gradient_rows[idx] = 1;
        for (int s = -1; s <= 1; s += 2) {
          ks.in_gradient_rows[std::size_t(g.dims.linear(i + s, j, k))] = 1;
          ks.in_gradient_rows[std::size_t(g.dims.linear(i, j + s, k))] = 1;
          ks.in_gradient_rows[std::size_t(g.dims.linear(i, j, k + s))] = 1;
        }
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const int step[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (const auto& s : step) {
          const int i2 = i + s[0], j2 = j + s[1], k2 = k + s[2];
          if (i2 >= n || j2 >= n || k2 >= n) continue;
          const double c0 = chi(i, j, k), c1 = chi(i2, j2, k2);
          if ((c0 < 0.0) == (c1 < 0.0)) continue;
          const double t = c0 / (c0 - c1);
          ks.screen.push_back(g.center(i, j, k) + t * (g.center(i2, j2, k2) - g.center(i, j, k)));
        }
      }
    }
  }

  ks.prob.grad_field = std::move(field);
  ks.prob.grid = VoxelGrid(g);
  std::fill(ks.prob.grid.active.begin(), ks.prob.grid.active.end(), std::uint8_t(1));
  ks.prob.params.w0 = 4.0;
  ks.prob.params.w1 = 1.0;
  ks.prob.params.cg_tol = 1e-13;
  ks.prob.params.cg_max_iters = 20000;
  ks.prob.params.resolutions = {g.voxel_size};
  return ks;
}

inline void bind(KnownSolution& ks) { ks.prob.screen_points = ks.screen; }

// max |chi - chi_star| over voxels tied into the gradient term, after removing
// the mean difference (the offset the screening term pins down).
inline double known_solution_error(const KnownSolution& ks, const std::vector<double>& chi) {
  double mean = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < chi.size(); ++i) {
    if (!ks.in_gradient_rows[i]) continue;
    mean += chi[i] - ks.chi_star[i];
    ++count;
  }
  mean /= std::max(count, 1);
  double err = 0.0;
  for (std::size_t i = 0; i < chi.size(); ++i) {
    if (ks.in_gradient_rows[i]) err = std::max(err, std::abs(chi[i] - ks.chi_star[i] - mean));
  }
  return err;
}

}  // namespace gradsurf::testing
