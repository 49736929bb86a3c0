#include "gradsurf/marching_cubes.hpp"

#include <cmath>
#include <unordered_map>

#include "gradsurf/error.hpp"
#include "gradsurf/parallel.hpp"
#include "mc_tables.hpp"

namespace gradsurf {

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorners[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                                     {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

using EdgeKey = std::int64_t;  // linear index of the lower endpoint * 3 + axis
using KeyTriangle = std::array<EdgeKey, 3>;

EdgeKey edge_key(const Dims3& d, int i, int j, int k, int edge) {
  const int* a = kCorner[kEdgeCorners[edge][0]];
  const int* b = kCorner[kEdgeCorners[edge][1]];
  const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
  return d.linear(i + a[0], j + a[1], k + a[2]) * 3 + axis;
}

// Triangles of one cell, appended as edge keys.
void polygonise(const VoxelGrid& grid, int i, int j, int k, double iso, std::vector<KeyTriangle>& out) {
  const Dims3& d = grid.dims();
  double val[8];
  int cube = 0;
  for (int c = 0; c < 8; ++c) {
    const auto v = std::size_t(d.linear(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]));
    if (!grid.active[v]) return;
    val[c] = grid.chi[v];
    if (val[c] < iso) cube |= 1 << c;
  }
  if (mc::kEdgeTable[cube] == 0) return;
  const int* tri = mc::kTriTable[cube];
  for (int t = 0; tri[t] != -1; t += 3) {
    // Table winding faces decreasing chi in this corner layout; swap to face increasing chi.
    out.push_back({edge_key(d, i, j, k, tri[t]), edge_key(d, i, j, k, tri[t + 2]),
                   edge_key(d, i, j, k, tri[t + 1])});
  }
}

Vec3 edge_vertex(const VoxelGrid& grid, EdgeKey key, double iso) {
  const Dims3& d = grid.dims();
  const int axis = int(key % 3);
  const std::int64_t lo = key / 3;
  const Index3 a = d.unlinear(lo);
  Index3 b = a;
  (axis == 0 ? b.i : axis == 1 ? b.j : b.k) += 1;
  const double va = grid.chi[std::size_t(lo)];
  const double vb = grid.chi[std::size_t(d.linear(b.i, b.j, b.k))];
  const double t = vb != va ? (iso - va) / (vb - va) : 0.5;
  Vec3 p = grid.geom.center(a.i, a.j, a.k);
  p[axis] += t * grid.voxel_size();
  return p;
}

IsoSurface assemble(const VoxelGrid& grid, const std::vector<KeyTriangle>& tris, double iso) {
  IsoSurface out;
  std::unordered_map<EdgeKey, int> index;
  index.reserve(tris.size());
  out.mesh.faces.reserve(tris.size());
  for (const KeyTriangle& t : tris) {
    std::array<int, 3> f{};
    for (int c = 0; c < 3; ++c) {
      auto [it, inserted] = index.try_emplace(t[std::size_t(c)], int(out.mesh.vertices.size()));
      if (inserted) out.mesh.vertices.push_back(edge_vertex(grid, t[std::size_t(c)], iso));
      f[std::size_t(c)] = it->second;
    }
    out.mesh.faces.push_back(f);
  }
  out.no_surface = out.mesh.faces.empty();
  return out;
}

void check(const VoxelGrid& grid, const IsoSurfaceConfig& cfg) {
  grid.geom.validate();
  if (!std::isfinite(cfg.iso_value)) throw Error(ErrorCode::InvalidArgument, "iso value must be finite");
}

}  // namespace

IsoSurface marching_cubes_serial(const VoxelGrid& grid, const IsoSurfaceConfig& cfg) {
  check(grid, cfg);
  const Dims3& d = grid.dims();
  std::vector<KeyTriangle> tris;
  for (int i = 0; i + 1 < d.nx; ++i) {
    for (int j = 0; j + 1 < d.ny; ++j) {
      for (int k = 0; k + 1 < d.nz; ++k) polygonise(grid, i, j, k, cfg.iso_value, tris);
    }
  }
  return assemble(grid, tris, cfg.iso_value);
}

IsoSurface marching_cubes(const VoxelGrid& grid, const IsoSurfaceConfig& cfg) {
  check(grid, cfg);
  const Dims3& d = grid.dims();
  // One bucket per x-slab of cells, concatenated in slab order.
  std::vector<std::vector<KeyTriangle>> slabs(std::size_t(d.nx - 1));
#pragma omp parallel for schedule(dynamic, 1) num_threads(num_threads())
  for (int i = 0; i < d.nx - 1; ++i) {
    auto& local = slabs[std::size_t(i)];
    for (int j = 0; j + 1 < d.ny; ++j) {
      for (int k = 0; k + 1 < d.nz; ++k) polygonise(grid, i, j, k, cfg.iso_value, local);
    }
  }
  std::size_t total = 0;
  for (const auto& s : slabs) total += s.size();
  std::vector<KeyTriangle> tris;
  tris.reserve(total);
  for (const auto& s : slabs) tris.insert(tris.end(), s.begin(), s.end());
  return assemble(grid, tris, cfg.iso_value);
}

}  // namespace gradsurf
