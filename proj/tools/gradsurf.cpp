// gradsurf command-line front end. Data goes to files or stdout, logs to stderr.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gradsurf/depth_io.hpp"
#include "gradsurf/error.hpp"
#include "gradsurf/marching_cubes.hpp"
#include "gradsurf/metrics.hpp"
#include "gradsurf/parallel.hpp"
#include "gradsurf/pipeline.hpp"
#include "gradsurf/sampling.hpp"
#include "gradsurf/solver.hpp"

namespace fs = std::filesystem;
using namespace gradsurf;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_report(const Report& r) { std::cout << r.str() << std::flush; }

std::vector<fs::path> depth_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("gradsurf"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"Gradient-domain screened Poisson surface reconstruction"};
  app.require_subcommand(1);
  int threads = 0;
  bool deterministic = false;
  std::string log_level = "info";
  app.add_option("--threads", threads, "Worker threads (default: GRADSURF_THREADS, else all cores)");
  app.add_flag("--deterministic", deterministic, "No effect; reductions never depend on the thread count");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Draw an oriented point cloud from a mesh");
  std::string strategy = "area";
  std::size_t count = 100000;
  std::uint64_t seed = 0;
  double radius = 0.0;
  fs::path in_path, out_path;
  sample_cmd->add_option("--strategy", strategy, "vertex, area, poisson or curvature")
      ->check(CLI::IsMember({"vertex", "area", "poisson", "poisson_disk", "curvature"}));
  sample_cmd->add_option("--count", count, "Number of points")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", seed, "Random seed");
  sample_cmd->add_option("--radius", radius, "Poisson-disk radius (default sqrt(area / (2 count)))")
      ->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("input", in_path, "Input mesh (PLY or OBJ)")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("output", out_path, "Output cloud (PLY)")->required();

  // splat
  auto* splat_cmd = app.add_subcommand("splat", "Splat a cloud into a grid (chi = splat weight)");
  fs::path points_path;
  double voxel = 0.04;
  EnergyParams ep;
  splat_cmd->add_option("--points", points_path, "Oriented cloud")->required()->check(CLI::ExistingFile);
  splat_cmd->add_option("--voxel", voxel, "Voxel size in meters")->check(CLI::PositiveNumber);
  splat_cmd->add_option("--band", ep.band_radius, "Band radius in voxels")->check(CLI::PositiveNumber);
  splat_cmd->add_option("--out", out_path, "Output grid")->required();

  // reconstruct
  auto* recon_cmd = app.add_subcommand("reconstruct", "Solve for chi coarse to fine");
  fs::path screen_path, grad_path;
  recon_cmd->add_option("--screen", screen_path, "Screening cloud P")->required()->check(CLI::ExistingFile);
  recon_cmd->add_option("--grad", grad_path, "Gradient cloud Q")->required()->check(CLI::ExistingFile);
  recon_cmd->add_option("--res", ep.resolutions, "Voxel sizes, coarse to fine")->delimiter(',');
  recon_cmd->add_option("--w0", ep.w0, "Screening weight");
  recon_cmd->add_option("--w1", ep.w1, "Gradient weight");
  recon_cmd->add_option("--band", ep.band_radius, "Band radius in voxels");
  recon_cmd->add_option("--tol", ep.cg_tol, "Relative residual tolerance");
  recon_cmd->add_option("--max-iters", ep.cg_max_iters, "CG iteration cap per level");
  recon_cmd->add_option("--out", out_path, "Output grid")->required();

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "Marching cubes on a grid");
  fs::path grid_path;
  double iso = 0.0;
  extract_cmd->add_option("--grid", grid_path, "Input grid")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--iso", iso, "Iso value");
  extract_cmd->add_option("--out", out_path, "Output mesh (PLY or OBJ)")->required();

  // eval3d
  auto* eval3d_cmd = app.add_subcommand("eval3d", "Precision, recall and F-score against a reference mesh");
  fs::path pred_path, gt_path;
  double threshold = kDefaultFscoreThreshold;
  std::size_t samples = kDefaultSamplesPerMesh;
  eval3d_cmd->add_option("pred", pred_path, "Predicted mesh")->required()->check(CLI::ExistingFile);
  eval3d_cmd->add_option("gt", gt_path, "Reference mesh")->required()->check(CLI::ExistingFile);
  eval3d_cmd->add_option("--threshold", threshold, "Distance threshold in meters")->check(CLI::PositiveNumber);
  eval3d_cmd->add_option("--samples", samples, "Samples per mesh")->check(CLI::PositiveNumber);
  eval3d_cmd->add_option("--seed", seed, "Random seed");

  // eval2d
  auto* eval2d_cmd = app.add_subcommand("eval2d", "Depth metrics of a mesh against depth frames");
  fs::path depth_dir, traj_path;
  eval2d_cmd->add_option("--pred-mesh", pred_path, "Predicted mesh")->required()->check(CLI::ExistingFile);
  eval2d_cmd->add_option("--gt-depth", depth_dir, "Directory of depth frames, matched in sorted name order")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval2d_cmd->add_option("--traj", traj_path, "Trajectory file")->required()->check(CLI::ExistingFile);

  // heatmap
  auto* heat_cmd = app.add_subcommand("heatmap", "Color source vertices by distance to the target");
  fs::path source_path, target_path;
  int k = 3;
  heat_cmd->add_option("source", source_path, "Source mesh")->required()->check(CLI::ExistingFile);
  heat_cmd->add_option("target", target_path, "Target mesh")->required()->check(CLI::ExistingFile);
  heat_cmd->add_option("--k", k, "Neighbors per vertex")->check(CLI::PositiveNumber);
  heat_cmd->add_option("--out", out_path, "Colored PLY")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Sample, reconstruct, extract and optionally evaluate");
  fs::path config_path;
  PipelineConfig pc;
  std::map<std::string, std::string> overrides;
  run_cmd->add_option("--config", config_path, "key=value config file");
  auto kv_option = [&](const std::string& flag, const std::string& key, const std::string& help) {
    run_cmd->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };
  kv_option("--input", "input", "Source mesh");
  kv_option("--out-mesh", "out_mesh", "Output mesh");
  kv_option("--out-grid", "out_grid", "Output grid");
  kv_option("--report", "report", "Report file (default stdout)");
  kv_option("--gt", "gt", "Reference mesh for evaluation");
  kv_option("--seed", "seed", "Random seed");
  kv_option("--screen-count", "screen_count", "Screening points");
  kv_option("--grad-count", "grad_count", "Gradient points");
  kv_option("--screen-strategy", "screen_strategy", "Screening sampler");
  kv_option("--grad-strategy", "grad_strategy", "Gradient sampler");
  kv_option("--radius", "disk_radius", "Poisson-disk radius");
  kv_option("--res", "resolutions", "Voxel sizes, coarse to fine, comma separated");
  kv_option("--w0", "w0", "Screening weight");
  kv_option("--w1", "w1", "Gradient weight");
  kv_option("--band", "band_radius", "Band radius in voxels");
  kv_option("--tol", "cg_tol", "Relative residual tolerance");
  kv_option("--max-iters", "cg_max_iters", "CG iteration cap per level");
  kv_option("--threshold", "eval_threshold", "Evaluation distance threshold");
  kv_option("--eval-samples", "eval_samples", "Evaluation samples per mesh");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  if (threads <= 0) {
    threads = threads_from_env(int(std::max(1u, std::thread::hardware_concurrency())));
  }
  // Every reduction in the library already uses a fixed blocking, so
  // --deterministic only needs to be accepted here.
  (void)deterministic;
  set_num_threads(threads);

  try {
    if (*sample_cmd) {
      TriangleMesh mesh = load_mesh(in_path);
      if (!mesh.has_normals()) mesh = compute_vertex_normals(mesh);
      SamplerConfig sc{parse_strategy(strategy), count, seed, radius};
      save_cloud(sample(mesh, sc), out_path);
    } else if (*splat_cmd) {
      const OrientedPointCloud cloud = load_cloud(points_path);
      if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "no points in " + points_path.string());
      const auto geom = geometry_covering(padded_bounds(bounds(cloud), ep.band_radius, voxel), voxel);
      const SplatField field = splat(cloud, geom);
      VoxelGrid grid(geom);
      grid.chi = field.weight_sum;
      grid.active = build_band(cloud, geom, ep.band_radius);
      save_grid(grid, out_path);
    } else if (*recon_cmd) {
      ep.validate();
      const OrientedPointCloud screen = load_cloud(screen_path);
      const OrientedPointCloud grad = load_cloud(grad_path);
      if (screen.empty() && grad.empty()) throw Error(ErrorCode::EmptyCloud, "both clouds are empty");
      Aabb box = bounds(screen);
      if (!grad.empty()) box.extend(bounds(grad));
      const MultiresResult res = solve_multires(screen, grad, ep, box);
      save_grid(res.grid, out_path);
      Report r;
      for (std::size_t l = 0; l < res.levels.size(); ++l) {
        const auto& lv = res.levels[l];
        const std::string p = "level" + std::to_string(l) + ".";
        r.set(p + "voxel_size", lv.voxel_size);
        r.set(p + "iterations", lv.iterations);
        r.set(p + "converged", lv.converged);
        r.set(p + "final_energy", lv.final_energy);
        r.set(p + "time_ms", lv.milliseconds);
      }
      r.set("converged", res.converged);
      print_report(r);
    } else if (*extract_cmd) {
      const IsoSurface s = marching_cubes(load_grid(grid_path), IsoSurfaceConfig{iso});
      if (s.no_surface) spdlog::warn("no iso-surface crossing inside the band");
      save_mesh(s.mesh, out_path);
    } else if (*eval3d_cmd) {
      const auto m = eval_3d(load_mesh(pred_path), load_mesh(gt_path), threshold, samples, seed);
      Report r;
      r.set("threshold", m.threshold);
      r.set("precision", m.precision);
      r.set("recall", m.recall);
      r.set("fscore", m.fscore);
      print_report(r);
    } else if (*eval2d_cmd) {
      const TriangleMesh mesh = load_mesh(pred_path);
      const auto views = load_trajectory(traj_path);
      const auto files = depth_files(depth_dir);
      if (files.size() != views.size()) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(files.size()) + " depth frames but " +
                                                    std::to_string(views.size()) + " poses");
      }
      MetricsReport2D sum;
      std::size_t frames = 0;
      for (std::size_t f = 0; f < files.size(); ++f) {
        const DepthImage gt = load_depth(files[f]);
        if (gt.width != views[f].width || gt.height != views[f].height) {
          throw Error(ErrorCode::InvalidArgument, files[f].string() + " does not match the trajectory image size");
        }
        try {
          const auto m = eval_2d(render_depth(mesh, views[f]), gt);
          sum.abs_rel += m.abs_rel;
          sum.abs_diff += m.abs_diff;
          sum.sq_rel += m.sq_rel;
          sum.rmse += m.rmse;
          sum.valid_pixels += m.valid_pixels;
          ++frames;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoValidPixels) throw;
          spdlog::warn("{}: no valid pixels, frame skipped", files[f].string());
        }
      }
      if (frames == 0) throw Error(ErrorCode::NoValidPixels, "no frame has valid pixels");
      const double n = double(frames);
      Report r;
      r.set("frames", frames);
      r.set("valid_pixels", sum.valid_pixels);
      r.set("abs_rel", sum.abs_rel / n);
      r.set("abs_diff", sum.abs_diff / n);
      r.set("sq_rel", sum.sq_rel / n);
      r.set("rmse", sum.rmse / n);
      print_report(r);
    } else if (*heat_cmd) {
      const TriangleMesh source = load_mesh(source_path);
      const auto values = error_heatmap(source, load_mesh(target_path), k);
      save_heatmap_ply(source, values, out_path);
    } else if (*run_cmd) {
      try {
        if (!config_path.empty()) apply_key_values(pc, read_key_values(config_path));
        apply_key_values(pc, overrides);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const PipelineResult res = run_pipeline(pc);
      if (pc.report.empty()) print_report(res.report);
      if (res.exit_code != 0) {
        spdlog::error("{} failed: {}", res.failed_stage, res.message);
      }
      return res.exit_code;
    }
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == ErrorCode::InvalidArgument ? 2 : 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
