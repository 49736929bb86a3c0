#include <doctest.h>

#include <cstdlib>

#include "gradsurf/marching_cubes.hpp"
#include "gradsurf/metrics.hpp"
#include "gradsurf/parallel.hpp"
#include "gradsurf/primitives.hpp"
#include "gradsurf/solver.hpp"
#include "support.hpp"

using namespace gradsurf;
using namespace gradsurf::testing;

namespace {

// Runs fn once per thread count and returns the results.
template <class Fn>
auto with_threads(std::initializer_list<int> counts, Fn&& fn) {
  const int before = num_threads();
  std::vector<decltype(fn())> out;
  for (int t : counts) {
    set_num_threads(t);
    out.push_back(fn());
  }
  set_num_threads(before);
  return out;
}

}  // namespace

TEST_CASE("thread count plumbing") {
  const int before = num_threads();
  set_num_threads(3);
  CHECK(num_threads() == 3);
  set_num_threads(0);
  CHECK(num_threads() >= 1);
  set_num_threads(before);
  ::setenv("GRADSURF_THREADS", "5", 1);
  CHECK(threads_from_env(1) == 5);
  ::setenv("GRADSURF_THREADS", "abc", 1);
  CHECK(threads_from_env(2) == 2);
  ::unsetenv("GRADSURF_THREADS");
  CHECK(threads_from_env(7) == 7);
}

TEST_CASE("blocked reductions do not depend on the thread count") {
  std::mt19937_64 rng(1);
  std::vector<double> a(50001), b(50001);
  for (auto& v : a) v = uniform(rng, -1e3, 1e3);
  for (auto& v : b) v = uniform(rng, -1, 1);
  const auto sums = with_threads({1, 2, 3, 8}, [&] { return deterministic_sum(a); });
  const auto dots = with_threads({1, 2, 3, 8}, [&] { return deterministic_dot(a, b); });
  for (std::size_t i = 1; i < sums.size(); ++i) {
    CHECK(sums[i] == sums[0]);
    CHECK(dots[i] == dots[0]);
  }
  long double ref = 0.0L;
  for (double v : a) ref += v;
  CHECK(double(sums[0]) == doctest::Approx(double(ref)).epsilon(1e-12));
}

TEST_CASE("kernels give identical results for any thread count") {
  const auto cloud = sphere_cloud(Vec3::Zero(), 0.4, 8000, 2);
  EnergyParams params;
  params.resolutions = {0.1, 0.05};

  SUBCASE("splat") {
    GridGeometry g = geometry_covering(padded_bounds(bounds(cloud), 3, 0.05), 0.05);
    const auto r = with_threads({1, 4}, [&] { return splat(cloud, g); });
    CHECK(r[0].weight_sum == r[1].weight_sum);
    CHECK(r[0].normal_sum == r[1].normal_sum);
  }
  SUBCASE("multires solve") {
    const auto r = with_threads({1, 4}, [&] { return solve_multires(cloud, cloud, params, bounds(cloud)).grid.chi; });
    CHECK(r[0] == r[1]);
  }
  SUBCASE("extraction, rendering and metrics") {
    const auto grid = solve_multires(cloud, cloud, params, bounds(cloud)).grid;
    const auto meshes = with_threads({1, 4}, [&] { return marching_cubes(grid).mesh; });
    CHECK(meshes[0].vertices == meshes[1].vertices);
    CHECK(meshes[0].faces == meshes[1].faces);
    const auto ico = make_icosphere(Vec3::Zero(), 0.4, 3);
    CameraView view;
    view.width = 24;
    view.height = 18;
    view.intrinsics << 20, 0, 12, 0, 20, 9, 0, 0, 1;
    view.pose(2, 3) = -2.0;
    const auto depth = with_threads({1, 4}, [&] { return render_depth(meshes[0], view).values; });
    CHECK(depth[0] == depth[1]);
    const auto f = with_threads({1, 4}, [&] { return eval_3d(meshes[0], ico, 0.02, 5000, 1).fscore; });
    CHECK(f[0] == f[1]);
    const auto h = with_threads({1, 4}, [&] { return error_heatmap(meshes[0], ico, 3); });
    CHECK(h[0] == h[1]);
    const auto c = with_threads({1, 4}, [&] { return triangle_curvature(ico).per_face; });
    CHECK(c[0] == c[1]);
  }
}
