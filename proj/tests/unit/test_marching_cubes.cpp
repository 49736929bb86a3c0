#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>

#include "gradsurf/marching_cubes.hpp"
#include "gradsurf/parallel.hpp"
#include "support.hpp"

using namespace gradsurf;
using namespace gradsurf::testing;

namespace {

VoxelGrid field_grid(int n, double v, const Vec3& origin, const std::function<double(const Vec3&)>& f) {
  GridGeometry g;
  g.origin = origin;
  g.voxel_size = v;
  g.dims = {n, n, n};
  VoxelGrid grid(g);
  std::fill(grid.active.begin(), grid.active.end(), std::uint8_t(1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) grid.at(i, j, k) = f(g.center(i, j, k));
  return grid;
}

VoxelGrid sphere_sdf(int n, double r) {
  const double v = 1.0 / n;
  return field_grid(n, v, Vec3::Constant(-0.5), [r](const Vec3& p) { return p.norm() - r; });
}

std::map<std::pair<int, int>, int> edge_uses(const TriangleMesh& m) {
  std::map<std::pair<int, int>, int> uses;
  for (const auto& f : m.faces) {
    for (int e = 0; e < 3; ++e) {
      const int a = f[std::size_t(e)], b = f[std::size_t((e + 1) % 3)];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  return uses;
}

}  // namespace

TEST_CASE("planar field gives a planar surface") {
  const auto grid = field_grid(8, 1.0 / 8, Vec3::Zero(), [](const Vec3& p) { return p.z() - 0.5; });
  const auto s = marching_cubes(grid);
  REQUIRE_FALSE(s.no_surface);
  CHECK(s.mesh.faces.size() > 0);
  for (const auto& v : s.mesh.vertices) CHECK(std::abs(v.z() - 0.5) < 1e-9);
  for (std::size_t f = 0; f < s.mesh.faces.size(); ++f) {
    if (s.mesh.face_area(f) > 0.0) CHECK(s.mesh.face_normal(f).z() == doctest::Approx(1.0));
  }
}

TEST_CASE("sphere distance field") {
  const int n = 64;
  const double r = 0.3, v = 1.0 / n;
  const auto s = marching_cubes(sphere_sdf(n, r));
  REQUIRE(s.mesh.vertices.size() > 1000);
  double mean = 0.0;
  for (const auto& p : s.mesh.vertices) {
    const double e = std::abs(p.norm() - r);
    CHECK(e < 0.5 * v);
    mean += e;
  }
  mean /= double(s.mesh.vertices.size());
  CHECK(mean < 0.1 * v);

  SUBCASE("watertight") {
    for (const auto& [edge, count] : edge_uses(s.mesh)) CHECK(count == 2);
    // Closed genus-0 surface.
    const auto e = std::int64_t(edge_uses(s.mesh).size());
    CHECK(std::int64_t(s.mesh.vertices.size()) - e + std::int64_t(s.mesh.faces.size()) == 2);
  }
  SUBCASE("triangles face increasing chi") {
    int outward = 0, total = 0;
    for (std::size_t f = 0; f < s.mesh.faces.size(); ++f) {
      if (s.mesh.face_area(f) < 1e-14) continue;
      ++total;
      if (s.mesh.face_normal(f).dot(s.mesh.vertices[std::size_t(s.mesh.faces[f][0])]) > 0.0) ++outward;
    }
    CHECK(outward == total);
  }
  SUBCASE("vertices lie on lattice edges") {
    const auto& g = sphere_sdf(n, r).geom;
    for (const auto& p : s.mesh.vertices) {
      const Vec3 u = g.to_index(p);
      int on = 0;
      for (int a = 0; a < 3; ++a) on += std::abs(u[a] - std::round(u[a])) * v < 1e-9;
      CHECK(on >= 2);
    }
  }
}

TEST_CASE("no crossing means no surface") {
  const auto grid = field_grid(6, 0.1, Vec3::Zero(), [](const Vec3& p) { return 1.0 + p.x(); });
  const auto s = marching_cubes(grid);
  CHECK(s.no_surface);
  CHECK(s.mesh.vertices.empty());
  CHECK(s.mesh.faces.empty());
}

TEST_CASE("iso value shifts the surface") {
  const auto grid = field_grid(10, 0.1, Vec3::Zero(), [](const Vec3& p) { return p.x(); });
  const auto s = marching_cubes(grid, IsoSurfaceConfig{0.62});
  for (const auto& v : s.mesh.vertices) CHECK(std::abs(v.x() - 0.62) < 1e-9);
}

TEST_CASE("cells touching inactive voxels are skipped") {
  auto grid = field_grid(8, 0.125, Vec3::Zero(), [](const Vec3& p) { return p.z() - 0.5; });
  const auto full = marching_cubes(grid);
  for (int j = 0; j < 8; ++j)
    for (int k = 0; k < 8; ++k) grid.active[std::size_t(grid.geom.dims.linear(3, j, k))] = 0;
  const auto cut = marching_cubes(grid);
  CHECK(cut.mesh.faces.size() < full.mesh.faces.size());
  const double x_lo = grid.geom.center(2, 0, 0).x(), x_hi = grid.geom.center(4, 0, 0).x();
  for (const auto& v : cut.mesh.vertices) CHECK((v.x() <= x_lo + 1e-12 || v.x() >= x_hi - 1e-12));
  // The gap leaves open boundaries.
  int boundary = 0;
  for (const auto& [edge, count] : edge_uses(cut.mesh)) boundary += count == 1;
  CHECK(boundary > 0);
}

TEST_CASE("mirroring the field mirrors the mesh") {
  const Vec3 c(0.05, -0.02, 0.03);
  auto f = [c](const Vec3& p) { return (p - c).cwiseProduct(Vec3(1.0, 1.3, 0.8)).norm() - 0.27; };
  const int n = 24;
  const double v = 1.0 / n;
  const auto a = field_grid(n, v, Vec3::Constant(-0.5), f);
  auto b = a;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) b.at(i, j, k) = a.at(n - 1 - i, j, k);
  auto key = [](const Vec3& p) { return std::tuple{std::llround(p.x() * 1e8), std::llround(p.y() * 1e8), std::llround(p.z() * 1e8)}; };
  std::vector<std::tuple<long long, long long, long long>> va, vb;
  for (const auto& p : marching_cubes(a).mesh.vertices) va.push_back(key(Vec3(-p.x(), p.y(), p.z())));
  for (const auto& p : marching_cubes(b).mesh.vertices) vb.push_back(key(p));
  std::sort(va.begin(), va.end());
  std::sort(vb.begin(), vb.end());
  CHECK(va == vb);
}

TEST_CASE("parallel extraction equals the serial path") {
  const auto grid = sphere_sdf(40, 0.35);
  const int before = num_threads();
  set_num_threads(4);
  const auto par = marching_cubes(grid);
  set_num_threads(before);
  const auto ser = marching_cubes_serial(grid);
  CHECK(par.mesh.vertices == ser.mesh.vertices);
  CHECK(par.mesh.faces == ser.mesh.faces);
}
