#include <doctest.h>

#include <fstream>
#include <numeric>

#include "gradsurf/error.hpp"
#include "gradsurf/voxel_grid.hpp"
#include "support.hpp"

using namespace gradsurf;
using namespace gradsurf::testing;

namespace {

GridGeometry unit_geometry(int n, double v = 1.0) {
  GridGeometry g;
  g.origin = Vec3::Zero();
  g.voxel_size = v;
  g.dims = {n, n, n};
  return g;
}

VoxelGrid full_grid(const GridGeometry& g) {
  VoxelGrid grid(g);
  std::fill(grid.active.begin(), grid.active.end(), std::uint8_t(1));
  return grid;
}

OrientedPointCloud one_point(const Vec3& p, const Vec3& n) {
  OrientedPointCloud c;
  c.push_back(p, n);
  return c;
}

}  // namespace

TEST_CASE("point on a voxel center splats all weight there") {
  const auto g = unit_geometry(4);
  const Vec3 n(0, 0.6, 0.8);
  for (const auto& f : {splat_serial(one_point(g.center(1, 2, 1), n), g), splat(one_point(g.center(1, 2, 1), n), g)}) {
    for (std::int64_t i = 0; i < g.dims.count(); ++i) {
      const bool here = i == g.dims.linear(1, 2, 1);
      CHECK(f.weight_sum[std::size_t(i)] == (here ? 1.0 : 0.0));
      CHECK(f.normal_sum[std::size_t(i)] == (here ? n : Vec3::Zero()));
    }
  }
}

TEST_CASE("point at a cell center splats an eighth to each corner") {
  const auto g = unit_geometry(4);
  const Vec3 n(1, 0, 0);
  const Vec3 p = g.center(1, 1, 1) + Vec3::Constant(0.5);
  const auto f = splat(one_point(p, n), g);
  int touched = 0;
  for (std::int64_t i = 0; i < g.dims.count(); ++i) {
    if (f.weight_sum[std::size_t(i)] == 0.0) continue;
    ++touched;
    CHECK(f.weight_sum[std::size_t(i)] == 0.125);
    CHECK(f.normal_sum[std::size_t(i)] == 0.125 * n);
  }
  CHECK(touched == 8);
}

TEST_CASE("splat weights form a partition of unity") {
  std::mt19937_64 rng(2);
  const auto g = unit_geometry(9, 0.1);
  OrientedPointCloud c;
  for (int i = 0; i < 1000; ++i) c.push_back(g.center(0, 0, 0) + random_vec(rng, 0.0, 0.8), random_unit(rng));
  const auto f = splat(c, g);
  double brute = 0.0;
  for (double w : f.weight_sum) brute += w;
  CHECK(brute == doctest::Approx(1000.0).epsilon(1e-9));
  CHECK(f.total_weight() == doctest::Approx(1000.0).epsilon(1e-9));
  CHECK(f.skipped == 0);
  for (std::size_t i = 0; i < f.weight_sum.size(); ++i) {
    CHECK(f.weight_sum[i] >= 0.0);
    if (f.weight_sum[i] == 0.0) CHECK(f.normal_sum[i] == Vec3::Zero());
  }
}

TEST_CASE("points outside the grid are skipped and counted") {
  const auto g = unit_geometry(4);
  OrientedPointCloud c;
  c.push_back(Vec3(-5, 0, 0), Vec3::UnitX());
  c.push_back(g.center(1, 1, 1), Vec3::UnitX());
  CHECK(splat(c, g).skipped == 1);
  CHECK(splat_serial(c, g).skipped == 1);
  CHECK_THROWS_AS(splat(OrientedPointCloud{}, g), Error);
}

TEST_CASE("parallel splat agrees with the serial scatter") {
  std::mt19937_64 rng(8);
  const auto g = unit_geometry(12, 0.05);
  OrientedPointCloud c;
  for (int i = 0; i < 5000; ++i) c.push_back(g.center(0, 0, 0) + random_vec(rng, -0.01, 0.56), random_unit(rng));
  const auto a = splat(c, g);
  const auto b = splat_serial(c, g);
  CHECK(a.skipped == b.skipped);
  for (std::size_t i = 0; i < a.weight_sum.size(); ++i) {
    CHECK(a.weight_sum[i] == doctest::Approx(b.weight_sum[i]).epsilon(1e-12).scale(1.0));
    CHECK((a.normal_sum[i] - b.normal_sum[i]).norm() <= 1e-12);
  }
}

TEST_CASE("splatting is the adjoint of trilinear evaluation") {
  std::mt19937_64 rng(4);
  const auto g = unit_geometry(7, 0.2);
  auto grid = full_grid(g);
  for (auto& c : grid.chi) c = uniform(rng, -1, 1);
  std::vector<Vec3> pts;
  std::vector<double> vals;
  for (int i = 0; i < 200; ++i) {
    pts.push_back(g.center(0, 0, 0) + random_vec(rng, 0.0, 1.2));
    vals.push_back(uniform(rng, -2, 2));
  }
  double lhs = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) lhs += vals[i] * trilinear_eval(grid, pts[i]);
  const auto s = splat_scalar(pts, vals, g);
  double rhs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) rhs += grid.chi[i] * s[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("central differences") {
  const auto g = unit_geometry(5, 0.3);
  auto grid = full_grid(g);
  SUBCASE("linear field") {
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) grid.at(i, j, k) = g.center(i, j, k).x();
    const Vec3 d = central_difference(grid, {2, 2, 2});
    CHECK(d.x() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(d.y() == 0.0);
    CHECK(d.z() == 0.0);
  }
  SUBCASE("constant field") {
    std::fill(grid.chi.begin(), grid.chi.end(), 3.5);
    CHECK(central_difference(grid, {1, 2, 3}) == Vec3::Zero());
  }
  SUBCASE("quadratic field") {
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) grid.at(i, j, k) = std::pow(g.center(i, j, k).x(), 2);
    const double x0 = g.center(2, 2, 2).x();
    CHECK(central_difference(grid, {2, 2, 2}).x() == doctest::Approx(2 * x0).epsilon(1e-13));
  }
  SUBCASE("linearity") {
    std::mt19937_64 rng(5);
    auto other = grid;
    for (auto& c : grid.chi) c = uniform(rng, -1, 1);
    for (auto& c : other.chi) c = uniform(rng, -1, 1);
    auto mix = grid;
    for (std::size_t i = 0; i < mix.chi.size(); ++i) mix.chi[i] = 2.0 * grid.chi[i] - 0.5 * other.chi[i];
    const Vec3 expect = 2.0 * central_difference(grid, {2, 1, 3}) - 0.5 * central_difference(other, {2, 1, 3});
    CHECK((central_difference(mix, {2, 1, 3}) - expect).norm() <= 1e-12);
  }
  SUBCASE("inactive neighbor") {
    grid.active[std::size_t(g.dims.linear(2, 2, 3))] = 0;
    CHECK_THROWS_AS(central_difference(grid, {2, 2, 2}), Error);
    CHECK_THROWS_AS(central_difference(grid, {0, 2, 2}), Error);
  }
}

TEST_CASE("band around a single point") {
  const auto g = unit_geometry(9);
  const auto band = build_band(one_point(g.center(4, 4, 4) + Vec3(0.2, -0.3, 0.1), Vec3::UnitZ()), g, 1);
  int count = 0;
  for (std::int64_t i = 0; i < g.dims.count(); ++i) {
    if (!band[std::size_t(i)]) continue;
    ++count;
    const auto [a, b, c] = g.dims.unlinear(i);
    CHECK(std::abs(a - 4) <= 1);
    CHECK(std::abs(b - 4) <= 1);
    CHECK(std::abs(c - 4) <= 1);
  }
  CHECK(count <= 27);
  CHECK(count >= 8);
}

TEST_CASE("wide band covers the grid") {
  const auto g = unit_geometry(5);
  const auto band = build_band(one_point(g.center(2, 2, 2), Vec3::UnitZ()), g, 10);
  CHECK(std::all_of(band.begin(), band.end(), [](std::uint8_t b) { return b == 1; }));
}

TEST_CASE("band around a plane matches brute force") {
  const auto g = unit_geometry(12, 0.1);
  std::mt19937_64 rng(6);
  OrientedPointCloud c;
  const double z = g.center(0, 0, 6).z() - 0.03;
  for (int i = 0; i < 400; ++i) c.push_back(Vec3(uniform(rng, 0.0, 1.2), uniform(rng, 0.0, 1.2), z), Vec3::UnitZ());
  const int r = 2;
  const auto band = build_band(c, g, r);
  std::vector<int> layers(12, 0);
  for (std::int64_t i = 0; i < g.dims.count(); ++i) {
    const auto [a, b, k] = g.dims.unlinear(i);
    bool expect = false;
    for (const auto& p : c.points) {
      const Vec3 d = (g.center(a, b, k) - p).cwiseAbs() / g.voxel_size;
      if (d.maxCoeff() <= r) {
        expect = true;
        break;
      }
    }
    CHECK(bool(band[std::size_t(i)]) == expect);
    if (band[std::size_t(i)]) layers[std::size_t(k)] = 1;
  }
  const int thickness = std::accumulate(layers.begin(), layers.end(), 0);
  CHECK(thickness >= 4);
  CHECK(thickness <= 6);
}

TEST_CASE("trilinear evaluation") {
  std::mt19937_64 rng(7);
  const auto g = unit_geometry(6, 0.25);
  auto grid = full_grid(g);
  SUBCASE("at a voxel center") {
    for (auto& c : grid.chi) c = uniform(rng, -1, 1);
    CHECK(trilinear_eval(grid, g.center(3, 1, 4)) == grid.at(3, 1, 4));
  }
  SUBCASE("linear fields are reproduced") {
    const Vec3 a(0.4, -1.0, 2.0);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 6; ++k) grid.at(i, j, k) = a.dot(g.center(i, j, k)) - 0.3;
    for (int t = 0; t < 50; ++t) {
      const Vec3 p = g.center(0, 0, 0) + random_vec(rng, 0.0, 1.25);
      CHECK(trilinear_eval(grid, p) == doctest::Approx(a.dot(p) - 0.3).epsilon(1e-12).scale(1.0));
    }
  }
  SUBCASE("matches a hand-written weighted sum") {
    for (auto& c : grid.chi) c = uniform(rng, -1, 1);
    for (int t = 0; t < 50; ++t) {
      const Vec3 p = g.center(0, 0, 0) + random_vec(rng, 0.0, 1.25);
      const Vec3 u = (p - g.origin) / g.voxel_size - Vec3::Constant(0.5);
      const int i = std::min(int(u.x()), 4), j = std::min(int(u.y()), 4), k = std::min(int(u.z()), 4);
      const double fx = u.x() - i, fy = u.y() - j, fz = u.z() - k;
      double ref = 0.0;
      for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
          for (int dz = 0; dz < 2; ++dz)
            ref += (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz) * grid.at(i + dx, j + dy, k + dz);
      CHECK(trilinear_eval(grid, p) == doctest::Approx(ref).epsilon(1e-13).scale(1.0));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(trilinear_eval(grid, Vec3(-1, 0, 0)), Error);
    grid.active[std::size_t(g.dims.linear(1, 1, 1))] = 0;
    CHECK_THROWS_AS(trilinear_eval(grid, g.center(1, 1, 1) + Vec3::Constant(0.1)), Error);
  }
}

TEST_CASE("upper face points attach to the last cell") {
  const auto g = unit_geometry(3);
  const auto s = trilinear_stencil(g, g.center(2, 2, 2));
  REQUIRE(s);
  double total = 0.0;
  for (int c = 0; c < 8; ++c) {
    total += s->weight[std::size_t(c)];
    if (s->index[std::size_t(c)] == g.dims.linear(2, 2, 2)) CHECK(s->weight[std::size_t(c)] == 1.0);
  }
  CHECK(total == 1.0);
  CHECK_FALSE(trilinear_stencil(g, g.center(2, 2, 2) + Vec3(1e-9, 0, 0)));
}

TEST_CASE("grid geometry") {
  Aabb box;
  box.extend(Vec3(-0.5, 0.0, 1.0));
  box.extend(Vec3(0.5, 0.1, 1.0));
  const auto g = geometry_covering(box, 0.1);
  CHECK(g.dims.nx >= 11);
  CHECK(g.dims.nz >= 2);
  const Vec3 u0 = g.to_index(box.min), u1 = g.to_index(box.max);
  CHECK(u0.minCoeff() >= 0.0);
  CHECK(u1.x() <= g.dims.nx - 1);
  CHECK(u1.y() <= g.dims.ny - 1);
  CHECK(u1.z() <= g.dims.nz - 1);
  std::mt19937_64 rng(10);
  for (int t = 0; t < 2000; ++t) {
    Aabb b;
    b.extend(random_vec(rng, -3, 3));
    b.extend(random_vec(rng, -3, 3));
    const double v = uniform(rng, 0.01, 0.3);
    const auto gg = geometry_covering(b, v);
    CHECK(trilinear_stencil(gg, b.min).has_value());
    CHECK(trilinear_stencil(gg, b.max).has_value());
  }
  GridGeometry bad = g;
  bad.voxel_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = g;
  bad.dims.ny = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("grid file round trip") {
  TempDir dir("grid");
  std::mt19937_64 rng(9);
  GridGeometry g;
  g.origin = Vec3(0.1, -2.0, 3.25);
  g.voxel_size = 0.04;
  g.dims = {5, 3, 7};
  VoxelGrid grid(g);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.chi[i] = float(uniform(rng, -1, 1));
    grid.active[i] = rng() & 1;
  }
  save_grid(grid, dir / "g.gsg");
  const auto back = load_grid(dir / "g.gsg");
  CHECK(back.geom.same_as(g));
  CHECK(back.chi == grid.chi);
  CHECK(back.active == grid.active);
  std::ofstream(dir / "junk.gsg") << "not a grid";
  CHECK_THROWS_AS(load_grid(dir / "junk.gsg"), Error);
}
