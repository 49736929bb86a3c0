#include "gradsurf/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <spdlog/spdlog.h>

#include "gradsurf/error.hpp"
#include "gradsurf/parallel.hpp"

namespace gradsurf {

namespace {

constexpr int kDir[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};

// Stencil of p if all eight corners are active.
std::optional<TrilinearStencil> active_stencil(const VoxelGrid& grid, const Vec3& p) {
  auto s = trilinear_stencil(grid.geom, p);
  if (!s) return std::nullopt;
  for (std::int64_t v : s->index) {
    if (!grid.active[std::size_t(v)]) return std::nullopt;
  }
  return s;
}

// True if voxel v carries a gradient term: active, splatted, six active neighbors.
bool gradient_row(const VoxelGrid& grid, const SplatField& field, std::int64_t v) {
  if (!grid.active[std::size_t(v)] || !(field.weight_sum[std::size_t(v)] > 0.0)) return false;
  const Index3 at = grid.dims().unlinear(v);
  for (const auto& d : kDir) {
    if (!grid.is_active(at.i + d[0], at.j + d[1], at.k + d[2])) return false;
  }
  return true;
}

void check_problem(const ReconstructionProblem& prob) {
  prob.params.validate();
  prob.grid.geom.validate();
  if (!prob.grad_field.geom.same_as(prob.grid.geom)) {
    throw Error(ErrorCode::InvalidArgument, "gradient field and grid disagree on placement");
  }
}

double seconds_to_ms(std::chrono::steady_clock::duration d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

}  // namespace

void EnergyParams::validate() const {
  if (!(w0 >= 0.0) || !std::isfinite(w0)) throw Error(ErrorCode::InvalidArgument, "w0 must be >= 0");
  if (!(w1 > 0.0) || !std::isfinite(w1)) throw Error(ErrorCode::InvalidArgument, "w1 must be > 0");
  if (band_radius < 1) throw Error(ErrorCode::InvalidArgument, "band radius must be >= 1");
  if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw Error(ErrorCode::InvalidArgument, "cg_tol must lie in (0,1)");
  if (cg_max_iters < 1) throw Error(ErrorCode::InvalidArgument, "cg_max_iters must be >= 1");
  if (resolutions.empty()) throw Error(ErrorCode::InvalidArgument, "no resolutions given");
  for (std::size_t i = 0; i < resolutions.size(); ++i) {
    if (!(resolutions[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolutions must be positive");
    if (i > 0 && !(resolutions[i] < resolutions[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "resolutions must be strictly decreasing");
    }
  }
}

EnergyBreakdown energy(const ReconstructionProblem& prob) {
  check_problem(prob);
  const VoxelGrid& grid = prob.grid;
  const SplatField& field = prob.grad_field;
  EnergyBreakdown e;
  for (const Vec3& p : prob.screen_points) {
    if (!active_stencil(grid, p)) {
      ++e.skipped_points;
      continue;
    }
    const double v = trilinear_eval(grid, p);
    e.screening += v * v;
  }
  for (std::int64_t v = 0; v < grid.dims().count(); ++v) {
    const auto sv = std::size_t(v);
    if (!grid.active[sv] || !(field.weight_sum[sv] > 0.0)) continue;
    if (!gradient_row(grid, field, v)) {
      ++e.skipped_voxels;
      continue;
    }
    const double w = field.weight_sum[sv];
    const Vec3 target = field.normal_sum[sv] / w;
    e.gradient += w * (central_difference(grid, grid.dims().unlinear(v)) - target).squaredNorm();
  }
  e.screening *= prob.params.w0;
  e.gradient *= prob.params.w1;
  return e;
}

std::vector<double> energy_gradient(const ReconstructionProblem& prob) {
  check_problem(prob);
  const VoxelGrid& grid = prob.grid;
  const SplatField& field = prob.grad_field;
  const double w0 = prob.params.w0, w1 = prob.params.w1;

  // Screening: adjoint of trilinear sampling applied to 2 w0 chi(p).
  std::vector<Vec3> pts;
  std::vector<double> vals;
  for (const Vec3& p : prob.screen_points) {
    if (!active_stencil(grid, p)) continue;
    pts.push_back(p);
    vals.push_back(2.0 * w0 * trilinear_eval(grid, p));
  }
  std::vector<double> grad = splat_scalar(pts, vals, grid.geom);

  // Gradient fitting: adjoint of central differences applied to 2 w1 W (D chi - n).
  const double inv2h = 1.0 / (2.0 * grid.voxel_size());
  const Dims3 d = grid.dims();
  for (std::int64_t v = 0; v < d.count(); ++v) {
    if (!gradient_row(grid, field, v)) continue;
    const auto sv = std::size_t(v);
    const Index3 at = d.unlinear(v);
    const double w = field.weight_sum[sv];
    const Vec3 r = 2.0 * w1 * w * (central_difference(grid, at) - field.normal_sum[sv] / w);
    for (int a = 0; a < 3; ++a) {
      const auto& lo = kDir[2 * a];
      const auto& hi = kDir[2 * a + 1];
      grad[std::size_t(d.linear(at.i + hi[0], at.j + hi[1], at.k + hi[2]))] += r[a] * inv2h;
      grad[std::size_t(d.linear(at.i + lo[0], at.j + lo[1], at.k + lo[2]))] -= r[a] * inv2h;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------

QuadraticForm::QuadraticForm(const ReconstructionProblem& prob) {
  check_problem(prob);
  const VoxelGrid& grid = prob.grid;
  const SplatField& field = prob.grad_field;
  const Dims3 d = grid.dims();
  w0_ = prob.params.w0;
  w1_ = prob.params.w1;
  inv_2h_ = 1.0 / (2.0 * grid.voxel_size());

  std::vector<std::int32_t> compact(std::size_t(d.count()), -1);
  for (std::int64_t v = 0; v < d.count(); ++v) {
    if (grid.active[std::size_t(v)]) {
      compact[std::size_t(v)] = std::int32_t(voxels_.size());
      voxels_.push_back(v);
    }
  }
  const std::size_t n = voxels_.size();

  for (const Vec3& p : prob.screen_points) {
    const auto s = active_stencil(grid, p);
    if (!s) {
      ++skipped_points_;
      continue;
    }
    ScreenRow row;
    for (int c = 0; c < 8; ++c) {
      row.idx[std::size_t(c)] = compact[std::size_t(s->index[std::size_t(c)])];
      row.w[std::size_t(c)] = s->weight[std::size_t(c)];
    }
    screen_.push_back(row);
  }

  std::vector<std::int32_t> row_at(n, -1);
  for (std::size_t u = 0; u < n; ++u) {
    const std::int64_t v = voxels_[u];
    const auto sv = std::size_t(v);
    if (!(field.weight_sum[sv] > 0.0)) continue;
    if (!gradient_row(grid, field, v)) {
      ++skipped_voxels_;
      continue;
    }
    const Index3 at = d.unlinear(v);
    GradRow row;
    for (int a = 0; a < 6; ++a) {
      row.nbr[std::size_t(a)] =
          compact[std::size_t(d.linear(at.i + kDir[a][0], at.j + kDir[a][1], at.k + kDir[a][2]))];
    }
    row.weight = field.weight_sum[sv];
    row.normal_sum = field.normal_sum[sv];
    row_at[u] = std::int32_t(grad_.size());
    grad_.push_back(row);
    constant_ += row.normal_sum.squaredNorm() / row.weight;
  }
  constant_ *= w1_;

  rows_around_.assign(n, {-1, -1, -1, -1, -1, -1});
  for (std::size_t u = 0; u < n; ++u) {
    const Index3 at = d.unlinear(voxels_[u]);
    for (int a = 0; a < 6; ++a) {
      const int i = at.i + kDir[a][0], j = at.j + kDir[a][1], k = at.k + kDir[a][2];
      if (!d.contains(i, j, k)) continue;
      const std::int32_t c = compact[std::size_t(d.linear(i, j, k))];
      if (c >= 0) rows_around_[u][std::size_t(a)] = row_at[std::size_t(c)];
    }
  }

  screen_ptr_.assign(n + 1, 0);
  for (const ScreenRow& row : screen_) {
    for (std::int32_t idx : row.idx) ++screen_ptr_[std::size_t(idx) + 1];
  }
  for (std::size_t u = 0; u < n; ++u) screen_ptr_[u + 1] += screen_ptr_[u];
  screen_ref_.resize(std::size_t(screen_ptr_[n]));
  {
    std::vector<std::int64_t> fill(screen_ptr_.begin(), screen_ptr_.end() - 1);
    for (std::size_t r = 0; r < screen_.size(); ++r) {
      for (int c = 0; c < 8; ++c) {
        const auto u = std::size_t(screen_[r].idx[std::size_t(c)]);
        screen_ref_[std::size_t(fill[u]++)] = std::int64_t(r) * 8 + c;
      }
    }
  }

  // b = 2 w1 D^T N and diag(A).
  rhs_.assign(n, 0.0);
  diagonal_.assign(n, 0.0);
  for (const GradRow& row : grad_) {
    const double dg = 2.0 * w1_ * row.weight * inv_2h_ * inv_2h_;
    for (int a = 0; a < 3; ++a) {
      const double b = 2.0 * w1_ * row.normal_sum[a] * inv_2h_;
      rhs_[std::size_t(row.nbr[std::size_t(2 * a + 1)])] += b;
      rhs_[std::size_t(row.nbr[std::size_t(2 * a)])] -= b;
      diagonal_[std::size_t(row.nbr[std::size_t(2 * a + 1)])] += dg;
      diagonal_[std::size_t(row.nbr[std::size_t(2 * a)])] += dg;
    }
  }
  for (const ScreenRow& row : screen_) {
    for (int c = 0; c < 8; ++c) {
      diagonal_[std::size_t(row.idx[std::size_t(c)])] += 2.0 * w0_ * row.w[std::size_t(c)] * row.w[std::size_t(c)];
    }
  }
}

void QuadraticForm::apply(std::span<const double> x, std::span<double> out) const {
  const int threads = num_threads();
  const std::size_t n = voxels_.size();
  std::vector<double> t(screen_.size());
  std::vector<Vec3> r(grad_.size());

#pragma omp parallel num_threads(threads)
  {
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(screen_.size()); ++i) {
      const ScreenRow& row = screen_[std::size_t(i)];
      double s = 0.0;
      for (int c = 0; c < 8; ++c) s += row.w[std::size_t(c)] * x[std::size_t(row.idx[std::size_t(c)])];
      t[std::size_t(i)] = s;
    }
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(grad_.size()); ++i) {
      const GradRow& row = grad_[std::size_t(i)];
      const auto& nb = row.nbr;
      r[std::size_t(i)] = row.weight * inv_2h_ *
                          Vec3(x[std::size_t(nb[1])] - x[std::size_t(nb[0])],
                               x[std::size_t(nb[3])] - x[std::size_t(nb[2])],
                               x[std::size_t(nb[5])] - x[std::size_t(nb[4])]);
    }
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(n); ++i) {
      const auto u = std::size_t(i);
      double s = 0.0;
      for (std::int64_t o = screen_ptr_[u]; o < screen_ptr_[u + 1]; ++o) {
        const std::int64_t ref = screen_ref_[std::size_t(o)];
        s += screen_[std::size_t(ref / 8)].w[std::size_t(ref % 8)] * t[std::size_t(ref / 8)];
      }
      double g = 0.0;
      const auto& around = rows_around_[u];
      for (int a = 0; a < 3; ++a) {
        // Row centered below us sees this voxel as its +a neighbor, and vice versa.
        if (around[std::size_t(2 * a)] >= 0) g += r[std::size_t(around[std::size_t(2 * a)])][a];
        if (around[std::size_t(2 * a + 1)] >= 0) g -= r[std::size_t(around[std::size_t(2 * a + 1)])][a];
      }
      out[u] = 2.0 * w0_ * s + 2.0 * w1_ * inv_2h_ * g;
    }
  }
}

void QuadraticForm::apply_serial(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  apply_gradient_part(x, out);
  for (const ScreenRow& row : screen_) {
    double s = 0.0;
    for (int c = 0; c < 8; ++c) s += row.w[std::size_t(c)] * x[std::size_t(row.idx[std::size_t(c)])];
    for (int c = 0; c < 8; ++c) out[std::size_t(row.idx[std::size_t(c)])] += 2.0 * w0_ * row.w[std::size_t(c)] * s;
  }
}

void QuadraticForm::apply_gradient_part(std::span<const double> x, std::span<double> out) const {
  for (const GradRow& row : grad_) {
    const auto& nb = row.nbr;
    for (int a = 0; a < 3; ++a) {
      const double diff = (x[std::size_t(nb[std::size_t(2 * a + 1)])] - x[std::size_t(nb[std::size_t(2 * a)])]) * inv_2h_;
      const double r = 2.0 * w1_ * row.weight * diff * inv_2h_;
      out[std::size_t(nb[std::size_t(2 * a + 1)])] += r;
      out[std::size_t(nb[std::size_t(2 * a)])] -= r;
    }
  }
}

double QuadraticForm::energy(std::span<const double> x) const {
  std::vector<double> ax(x.size());
  apply(x, ax);
  return 0.5 * deterministic_dot(x, ax) - deterministic_dot(rhs_, x) + constant_;
}

std::vector<double> QuadraticForm::gather(std::span<const double> dense) const {
  std::vector<double> x(voxels_.size());
  for (std::size_t u = 0; u < voxels_.size(); ++u) x[u] = dense[std::size_t(voxels_[u])];
  return x;
}

void QuadraticForm::scatter(std::span<const double> x, std::span<double> dense) const {
  for (std::size_t u = 0; u < voxels_.size(); ++u) dense[std::size_t(voxels_[u])] = x[u];
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kExactResidual = 1e-12;
}  // namespace

SolveResult solve_cg(const ReconstructionProblem& prob, std::optional<std::span<const double>> init) {
  const QuadraticForm form(prob);
  const EnergyParams& params = prob.params;
  if (params.w0 == 0.0) {
    spdlog::warn("w0 = 0: the energy is invariant to constant shifts of chi; minimizer not unique");
  }
  const std::size_t n = form.unknowns();
  const int threads = num_threads();

  SolveResult res;
  res.grid = VoxelGrid(prob.grid.geom);
  res.grid.active = prob.grid.active;
  res.unknowns = n;
  res.skipped_points = form.skipped_points();
  res.skipped_voxels = form.skipped_voxels();

  if (init && init->size() != prob.grid.size()) {
    throw Error(ErrorCode::InvalidArgument, "init field size does not match the grid");
  }
  std::vector<double> x = init ? form.gather(*init) : std::vector<double>(n, 0.0);
  const auto b = form.rhs();
  const auto diag = form.diagonal();

  std::vector<double> r(n), z(n), p(n), ap(n);
  form.apply(x, ap);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < std::int64_t(n); ++i) r[std::size_t(i)] = b[std::size_t(i)] - ap[std::size_t(i)];

  // E(x) = -1/2 x'(b + r) + c when r = b - Ax.
  auto energy_of = [&](std::span<const double> xs, std::span<const double> rs) {
    std::vector<double> br(n);
    for (std::size_t i = 0; i < n; ++i) br[i] = b[i] + rs[i];
    return -0.5 * deterministic_dot(xs, br) + form.constant();
  };

  res.initial_energy = energy_of(x, r);
  res.energy_history.push_back(res.initial_energy);
  const double r0 = std::sqrt(deterministic_dot(r, r));
  auto precondition = [&] {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < std::int64_t(n); ++i) {
      const auto s = std::size_t(i);
      z[s] = diag[s] > 0.0 ? r[s] / diag[s] : 0.0;
    }
  };

  std::vector<double> best = x;
  double best_energy = res.initial_energy;
  // An init that already solves the system to rounding level needs no iterations;
  // a relative test against its own residual would chase noise.
  const double exact_floor = kExactResidual * std::sqrt(deterministic_dot(b, b));
  double rel = r0 > 0.0 ? 1.0 : 0.0;
  res.converged = r0 <= exact_floor;
  if (!res.converged) {
    precondition();
    p = z;
    double rz = deterministic_dot(r, z);
    for (int it = 1; it <= params.cg_max_iters; ++it) {
      form.apply(p, ap);
      const double pap = deterministic_dot(p, ap);
      if (!(pap > 0.0)) break;  // breakdown; keep the best iterate
      const double alpha = rz / pap;
#pragma omp parallel for schedule(static) num_threads(threads)
      for (std::int64_t i = 0; i < std::int64_t(n); ++i) {
        const auto s = std::size_t(i);
        x[s] += alpha * p[s];
        r[s] -= alpha * ap[s];
      }
      res.iterations = it;
      const double e = energy_of(x, r);
      res.energy_history.push_back(e);
      if (e <= best_energy) {
        best_energy = e;
        best = x;
      }
      rel = std::sqrt(deterministic_dot(r, r)) / r0;
      if (rel <= params.cg_tol) {
        res.converged = true;
        break;
      }
      precondition();
      const double rz_next = deterministic_dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
#pragma omp parallel for schedule(static) num_threads(threads)
      for (std::int64_t i = 0; i < std::int64_t(n); ++i) {
        const auto s = std::size_t(i);
        p[s] = z[s] + beta * p[s];
      }
    }
  }
  res.relative_residual = rel;
  if (!res.converged) {
    spdlog::warn("CG stopped after {} iterations at relative residual {:.3e} (tol {:.1e})",
                 res.iterations, rel, params.cg_tol);
  } else {
    best = x;
  }
  form.scatter(best, res.grid.chi);
  res.final_energy = form.energy(best);
  return res;
}

std::vector<double> upsample(const VoxelGrid& coarse, const GridGeometry& fine) {
  const Dims3 d = fine.dims;
  std::vector<double> out(std::size_t(d.count()), 0.0);
  const GridGeometry& cg = coarse.geom;
  const Vec3 lo = cg.center(0, 0, 0);
  const Vec3 hi = cg.center(cg.dims.nx - 1, cg.dims.ny - 1, cg.dims.nz - 1);
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (std::int64_t v = 0; v < d.count(); ++v) {
    const Index3 at = d.unlinear(v);
    const Vec3 p = fine.center(at.i, at.j, at.k).cwiseMax(lo).cwiseMin(hi);
    const auto s = trilinear_stencil(cg, p);
    if (!s) continue;
    double sum = 0.0, wsum = 0.0;
    for (int c = 0; c < 8; ++c) {
      const auto idx = std::size_t(s->index[std::size_t(c)]);
      if (!coarse.active[idx]) continue;
      sum += s->weight[std::size_t(c)] * coarse.chi[idx];
      wsum += s->weight[std::size_t(c)];
    }
    if (wsum > 0.0) out[std::size_t(v)] = sum / wsum;
  }
  return out;
}

Aabb padded_bounds(const Aabb& cloud_bounds, int band_radius, double voxel_size) {
  const double pad = (band_radius + 2) * voxel_size;
  Aabb b = cloud_bounds;
  b.min -= Vec3::Constant(pad);
  b.max += Vec3::Constant(pad);
  return b;
}

ReconstructionProblem make_problem(const OrientedPointCloud& screen_cloud,
                                   const OrientedPointCloud& grad_cloud, const GridGeometry& geom,
                                   const EnergyParams& params) {
  ReconstructionProblem prob;
  prob.params = params;
  prob.screen_points = screen_cloud.points;
  prob.grid = VoxelGrid(geom);
  if (!screen_cloud.empty()) prob.grid.active = build_band(screen_cloud, geom, params.band_radius);
  if (!grad_cloud.empty()) {
    const auto band = build_band(grad_cloud, geom, params.band_radius);
    for (std::size_t v = 0; v < band.size(); ++v) prob.grid.active[v] |= band[v];
    prob.grad_field = splat(grad_cloud, geom);
  } else {
    prob.grad_field = SplatField(geom);
  }
  return prob;
}

MultiresResult solve_multires(const OrientedPointCloud& screen_cloud,
                              const OrientedPointCloud& grad_cloud, const EnergyParams& params,
                              const Aabb& bounds) {
  params.validate();
  if (screen_cloud.empty() && grad_cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "both point sets are empty");
  }
  MultiresResult out;
  VoxelGrid previous;
  for (std::size_t level = 0; level < params.resolutions.size(); ++level) {
    const auto t0 = std::chrono::steady_clock::now();
    const double h = params.resolutions[level];
    const GridGeometry geom = geometry_covering(padded_bounds(bounds, params.band_radius, h), h);
    const ReconstructionProblem prob = make_problem(screen_cloud, grad_cloud, geom, params);
    std::vector<double> init =
        level == 0 ? std::vector<double>(prob.grid.size(), 0.0) : upsample(previous, geom);
    SolveResult res = solve_cg(prob, std::span<const double>(init));

    LevelReport rep;
    rep.voxel_size = h;
    rep.dims = geom.dims;
    rep.active_voxels = res.unknowns;
    rep.iterations = res.iterations;
    rep.converged = res.converged;
    rep.start_energy = res.initial_energy;
    rep.final_energy = res.final_energy;
    rep.milliseconds = seconds_to_ms(std::chrono::steady_clock::now() - t0);
    spdlog::info("level {} ({} m): {}x{}x{} grid, {} active, {} iterations, E {:.6g} -> {:.6g}, {:.1f} ms",
                 level, h, geom.dims.nx, geom.dims.ny, geom.dims.nz, rep.active_voxels, rep.iterations,
                 rep.start_energy, rep.final_energy, rep.milliseconds);
    out.levels.push_back(rep);
    out.converged = out.converged && res.converged;
    previous = std::move(res.grid);
  }
  out.grid = std::move(previous);
  return out;
}

}  // namespace gradsurf
