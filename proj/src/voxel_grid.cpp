#include "gradsurf/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "gradsurf/error.hpp"
#include "gradsurf/parallel.hpp"
#include "ply.hpp"

namespace gradsurf {

namespace {

constexpr char kGridMagic[] = "GRADSURF-GRID v1\n";

// Offset of stencil corner c (bit 2: x, bit 1: y, bit 0: z).
constexpr int cx(int c) { return (c >> 2) & 1; }
constexpr int cy(int c) { return (c >> 1) & 1; }
constexpr int cz(int c) { return c & 1; }

}  // namespace

void GridGeometry::validate() const {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw Error(ErrorCode::InvalidArgument, "voxel size must be positive");
  }
  if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2) {
    throw Error(ErrorCode::InvalidArgument, "grid dims must all be >= 2");
  }
}

GridGeometry geometry_covering(const Aabb& box, double voxel_size) {
  if (!box.valid()) throw Error(ErrorCode::InvalidArgument, "empty bounding box");
  GridGeometry g;
  g.voxel_size = voxel_size;
  g.origin = box.min - Vec3::Constant(0.5 * voxel_size);
  const Vec3 extent = (box.max - box.min) / voxel_size;
  auto n = [](double e) { return std::max(2, int(std::ceil(e)) + 1); };
  g.dims = {n(extent.x()), n(extent.y()), n(extent.z())};
  // Rounding in to_index can put a box corner just outside the lattice.
  int* dims[3] = {&g.dims.nx, &g.dims.ny, &g.dims.nz};
  for (int a = 0; a < 3; ++a) {
    if (g.to_index(box.min)[a] < 0.0) {
      g.origin[a] -= voxel_size;
      ++*dims[a];
    }
    if (g.to_index(box.max)[a] > *dims[a] - 1) ++*dims[a];
  }
  g.validate();
  return g;
}

std::optional<TrilinearStencil> trilinear_stencil(const GridGeometry& geom, const Vec3& p) {
  const Vec3 u = geom.to_index(p);
  const int n[3] = {geom.dims.nx, geom.dims.ny, geom.dims.nz};
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (!(u[a] >= 0.0) || u[a] > double(n[a] - 1)) return std::nullopt;
    base[a] = std::min(int(std::floor(u[a])), n[a] - 2);
    frac[a] = u[a] - base[a];
  }
  TrilinearStencil s;
  for (int c = 0; c < 8; ++c) {
    s.index[std::size_t(c)] = geom.dims.linear(base[0] + cx(c), base[1] + cy(c), base[2] + cz(c));
    s.weight[std::size_t(c)] = (cx(c) ? frac[0] : 1.0 - frac[0]) *
                               (cy(c) ? frac[1] : 1.0 - frac[1]) *
                               (cz(c) ? frac[2] : 1.0 - frac[2]);
  }
  return s;
}

std::size_t VoxelGrid::active_count() const {
  return std::size_t(std::count_if(active.begin(), active.end(), [](std::uint8_t a) { return a != 0; }));
}

double SplatField::total_weight() const {
  double t = 0.0;
  for (double w : weight_sum) t += w;
  return t;
}

SplatField splat_serial(const OrientedPointCloud& cloud, const GridGeometry& geom) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "nothing to splat");
  geom.validate();
  SplatField field(geom);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto s = trilinear_stencil(geom, cloud.points[i]);
    if (!s) {
      ++field.skipped;
      continue;
    }
    for (int c = 0; c < 8; ++c) {
      const auto v = std::size_t(s->index[std::size_t(c)]);
      field.weight_sum[v] += s->weight[std::size_t(c)];
      field.normal_sum[v] += s->weight[std::size_t(c)] * cloud.normals[i];
    }
  }
  return field;
}

SplatField splat(const OrientedPointCloud& cloud, const GridGeometry& geom) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "nothing to splat");
  geom.validate();
  const int threads = num_threads();
  const std::size_t np = cloud.size();
  const auto nv = std::size_t(geom.dims.count());

  // Stencils, then a stable counting sort of points by their base corner.
  // Only the fractional offsets are kept per point; weights are rebuilt per corner.
  std::vector<Vec3> frac(np, Vec3::Zero());
  std::vector<std::int64_t> base(np, -1);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t i = 0; i < std::int64_t(np); ++i) {
    if (auto s = trilinear_stencil(geom, cloud.points[std::size_t(i)])) {
      base[std::size_t(i)] = s->index[0];
      const Index3 b = geom.dims.unlinear(s->index[0]);
      frac[std::size_t(i)] = geom.to_index(cloud.points[std::size_t(i)]) - Vec3(b.i, b.j, b.k);
    }
  }
  SplatField field(geom);
  std::vector<std::int64_t> start(nv + 1, 0);
  for (std::size_t i = 0; i < np; ++i) {
    if (base[i] < 0) {
      ++field.skipped;
    } else {
      ++start[std::size_t(base[i]) + 1];
    }
  }
  for (std::size_t v = 0; v < nv; ++v) start[v + 1] += start[v];
  std::vector<std::int32_t> order(static_cast<std::size_t>(start[nv]));
  {
    std::vector<std::int64_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < np; ++i) {
      if (base[i] >= 0) order[std::size_t(fill[std::size_t(base[i])]++)] = std::int32_t(i);
    }
  }

  const Dims3 d = geom.dims;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::int64_t v = 0; v < std::int64_t(nv); ++v) {
    const Index3 at = d.unlinear(v);
    double w = 0.0;
    Vec3 n = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
      const int bi = at.i - cx(c), bj = at.j - cy(c), bk = at.k - cz(c);
      if (!d.contains(bi, bj, bk)) continue;
      const auto b = std::size_t(d.linear(bi, bj, bk));
      for (std::int64_t o = start[b]; o < start[b + 1]; ++o) {
        const auto p = std::size_t(order[std::size_t(o)]);
        const Vec3& f = frac[p];
        const double wc = (cx(c) ? f.x() : 1.0 - f.x()) * (cy(c) ? f.y() : 1.0 - f.y()) *
                          (cz(c) ? f.z() : 1.0 - f.z());
        w += wc;
        n += wc * cloud.normals[p];
      }
    }
    field.weight_sum[std::size_t(v)] = w;
    field.normal_sum[std::size_t(v)] = n;
  }
  return field;
}

std::vector<double> splat_scalar(std::span<const Vec3> points, std::span<const double> values,
                                 const GridGeometry& geom) {
  std::vector<double> out(std::size_t(geom.dims.count()), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto s = trilinear_stencil(geom, points[i]);
    if (!s) continue;
    for (int c = 0; c < 8; ++c) {
      out[std::size_t(s->index[std::size_t(c)])] += s->weight[std::size_t(c)] * values[i];
    }
  }
  return out;
}

Vec3 central_difference(const VoxelGrid& grid, Index3 at) {
  const auto [i, j, k] = at;
  if (!grid.is_active(i - 1, j, k) || !grid.is_active(i + 1, j, k) ||
      !grid.is_active(i, j - 1, k) || !grid.is_active(i, j + 1, k) ||
      !grid.is_active(i, j, k - 1) || !grid.is_active(i, j, k + 1)) {
    throw Error(ErrorCode::InactiveNeighbor, "central difference stencil leaves the band");
  }
  const double inv = 1.0 / (2.0 * grid.voxel_size());
  return Vec3(grid.at(i + 1, j, k) - grid.at(i - 1, j, k), grid.at(i, j + 1, k) - grid.at(i, j - 1, k),
              grid.at(i, j, k + 1) - grid.at(i, j, k - 1)) *
         inv;
}

std::vector<std::uint8_t> build_band(const OrientedPointCloud& cloud, const GridGeometry& geom,
                                     int band_radius) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "band needs at least one point");
  if (band_radius < 1) throw Error(ErrorCode::InvalidArgument, "band radius must be >= 1");
  geom.validate();
  std::vector<std::uint8_t> mask(std::size_t(geom.dims.count()), 0);
  const int n[3] = {geom.dims.nx, geom.dims.ny, geom.dims.nz};
  const double r = band_radius;
  for (const Vec3& p : cloud.points) {
    const Vec3 u = geom.to_index(p);
    int lo[3], hi[3];
    bool empty = false;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, int(std::ceil(u[a] - r)));
      hi[a] = std::min(n[a] - 1, int(std::floor(u[a] + r)));
      empty = empty || lo[a] > hi[a];
    }
    if (empty) continue;
    for (int i = lo[0]; i <= hi[0]; ++i) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        const auto row = std::size_t(geom.dims.linear(i, j, 0));
        std::fill(mask.begin() + std::ptrdiff_t(row) + lo[2], mask.begin() + std::ptrdiff_t(row) + hi[2] + 1,
                  std::uint8_t{1});
      }
    }
  }
  return mask;
}

double trilinear_eval(const VoxelGrid& grid, const Vec3& p) {
  const auto s = trilinear_stencil(grid.geom, p);
  if (!s) throw Error(ErrorCode::OutOfBounds, "point outside the grid");
  double value = 0.0;
  for (int c = 0; c < 8; ++c) {
    const auto v = std::size_t(s->index[std::size_t(c)]);
    if (!grid.active[v]) throw Error(ErrorCode::InactiveNeighbor, "interpolation corner outside the band");
    value += s->weight[std::size_t(c)] * grid.chi[v];
  }
  return value;
}

void save_grid(const VoxelGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kGridMagic, std::ptrdiff_t(std::strlen(kGridMagic)));
  for (int a = 0; a < 3; ++a) ply::write_le(out, grid.geom.origin[a]);
  ply::write_le(out, grid.geom.voxel_size);
  ply::write_le<std::int32_t>(out, grid.geom.dims.nx);
  ply::write_le<std::int32_t>(out, grid.geom.dims.ny);
  ply::write_le<std::int32_t>(out, grid.geom.dims.nz);
  for (double c : grid.chi) ply::write_le(out, float(c));
  std::vector<std::uint8_t> bits((grid.active.size() + 7) / 8, 0);
  for (std::size_t v = 0; v < grid.active.size(); ++v) {
    if (grid.active[v]) bits[v / 8] |= std::uint8_t(1u << (v % 8));
  }
  out.write(reinterpret_cast<const char*>(bits.data()), std::ptrdiff_t(bits.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

VoxelGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::size_t mlen = std::strlen(kGridMagic);
  std::string magic(mlen, '\0');
  in.read(magic.data(), std::ptrdiff_t(mlen));
  if (!in || magic != kGridMagic) throw Error(ErrorCode::ParseError, path.string() + " is not a grid file");
  auto read = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(ErrorCode::ParseError, "truncated grid file");
  };
  GridGeometry g;
  for (int a = 0; a < 3; ++a) read(g.origin[a]);
  read(g.voxel_size);
  std::int32_t d[3];
  for (auto& x : d) read(x);
  g.dims = {d[0], d[1], d[2]};
  g.validate();
  VoxelGrid grid(g);
  std::vector<float> chi(grid.size());
  in.read(reinterpret_cast<char*>(chi.data()), std::ptrdiff_t(chi.size() * sizeof(float)));
  std::vector<std::uint8_t> bits((grid.size() + 7) / 8);
  in.read(reinterpret_cast<char*>(bits.data()), std::ptrdiff_t(bits.size()));
  if (!in) throw Error(ErrorCode::ParseError, "truncated grid file");
  for (std::size_t v = 0; v < grid.size(); ++v) {
    grid.chi[v] = chi[v];
    grid.active[v] = (bits[v / 8] >> (v % 8)) & 1u;
  }
  return grid;
}

}  // namespace gradsurf
