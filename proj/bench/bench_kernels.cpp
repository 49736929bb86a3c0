// Parallel kernels against their serial references. The thread count is the
// benchmark argument; serial variants ignore it.

#include <benchmark/benchmark.h>

#include <random>
#include <spdlog/spdlog.h>

#include "gradsurf/marching_cubes.hpp"
#include "gradsurf/metrics.hpp"
#include "gradsurf/parallel.hpp"
#include "gradsurf/primitives.hpp"
#include "gradsurf/sampling.hpp"
#include "gradsurf/solver.hpp"

using namespace gradsurf;

namespace {

struct Fixture {
  OrientedPointCloud cloud;
  GridGeometry geom;
  ReconstructionProblem prob;
  std::vector<Vec3> screen;
  VoxelGrid field;  // sphere distance field, fully active
  TriangleMesh scene;
  TriangleMesh shifted;
  CameraView view;

  Fixture() {
    spdlog::set_level(spdlog::level::err);
    scene = merge_meshes({make_icosphere(Vec3::Zero(), 0.5, 5), make_cube(Vec3(0.6, -0.3, -0.3), 0.6)});
    scene = compute_vertex_normals(scene);
    cloud = sample_area(scene, 200000, 1);
    screen = cloud.points;
    EnergyParams params;
    params.resolutions = {0.01};
    geom = geometry_covering(padded_bounds(bounds(cloud), params.band_radius, 0.01), 0.01);
    prob = make_problem(cloud, cloud, geom, params);
    prob.screen_points = screen;

    GridGeometry g;
    g.origin = Vec3::Constant(-0.5);
    g.voxel_size = 1.0 / 160;
    g.dims = {160, 160, 160};
    field = VoxelGrid(g);
    std::fill(field.active.begin(), field.active.end(), std::uint8_t(1));
    for (int i = 0; i < 160; ++i)
      for (int j = 0; j < 160; ++j)
        for (int k = 0; k < 160; ++k) field.at(i, j, k) = g.center(i, j, k).norm() - 0.35;

    shifted = scene;
    for (auto& v : shifted.vertices) v += Vec3(0.01, 0.02, 0.0);

    view.width = 320;
    view.height = 240;
    view.intrinsics << 280, 0, 160, 0, 280, 120, 0, 0, 1;
    view.pose(2, 3) = -2.5;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_splat_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(splat_serial(f.cloud, f.geom));
}

void BM_splat(benchmark::State& state) {
  const auto& f = fixture();
  set_num_threads(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(splat(f.cloud, f.geom));
}

void BM_apply_serial(benchmark::State& state) {
  static const QuadraticForm form(fixture().prob);
  std::vector<double> x(form.unknowns(), 1.0), y(form.unknowns());
  for (auto _ : state) {
    form.apply_serial(x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_apply(benchmark::State& state) {
  static const QuadraticForm form(fixture().prob);
  set_num_threads(int(state.range(0)));
  std::vector<double> x(form.unknowns(), 1.0), y(form.unknowns());
  for (auto _ : state) {
    form.apply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_marching_cubes_serial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes_serial(f.field));
}

void BM_marching_cubes(benchmark::State& state) {
  const auto& f = fixture();
  set_num_threads(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes(f.field));
}

void BM_render_brute_force(benchmark::State& state) {
  const auto& f = fixture();
  CameraView small = f.view;
  small.width = 32;
  small.height = 24;
  small.intrinsics << 28, 0, 16, 0, 28, 12, 0, 0, 1;
  for (auto _ : state) benchmark::DoNotOptimize(render_depth_brute_force(f.scene, small));
}

void BM_render_bvh(benchmark::State& state) {
  const auto& f = fixture();
  set_num_threads(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render_depth(f.scene, f.view));
}

void BM_heatmap_brute_force(benchmark::State& state) {
  const auto& f = fixture();
  TriangleMesh few;
  few.vertices.assign(f.shifted.vertices.begin(), f.shifted.vertices.begin() + 2000);
  for (auto _ : state) benchmark::DoNotOptimize(error_heatmap_brute_force(few, f.scene, 4));
}

void BM_heatmap_kdtree(benchmark::State& state) {
  const auto& f = fixture();
  set_num_threads(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(error_heatmap(f.shifted, f.scene, 4));
}

void threads(benchmark::internal::Benchmark* b) {
  for (int t : {1, 2, 4, 8}) b->Arg(t);
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_splat_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_splat)->Apply(threads);
BENCHMARK(BM_apply_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_apply)->Apply(threads);
BENCHMARK(BM_marching_cubes_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_marching_cubes)->Apply(threads);
// The brute-force render uses a 32x24 image and the brute-force heat map 2000
// source vertices; compare per-pixel or per-vertex cost.
BENCHMARK(BM_render_brute_force)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_render_bvh)->Apply(threads);
BENCHMARK(BM_heatmap_brute_force)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_heatmap_kdtree)->Apply(threads);

BENCHMARK_MAIN();
