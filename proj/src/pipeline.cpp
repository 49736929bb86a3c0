#include "gradsurf/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gradsurf/error.hpp"
#include "gradsurf/marching_cubes.hpp"
#include "gradsurf/metrics.hpp"

namespace gradsurf {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorCode::InvalidArgument, key + ": not a number: " + v);
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorCode::InvalidArgument, key + ": not an integer: " + v);
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const auto n = parse_int(key, v);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, key + " must be >= 1");
  return std::size_t(n);
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

// splitmix64 finalizer: decorrelates the per-stage streams derived from one seed.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void check_writable(const std::filesystem::path& p, const char* what) {
  const auto dir = p.parent_path();
  if (!dir.empty() && !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " directory does not exist: " + dir.string());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (input.empty()) throw Error(ErrorCode::InvalidArgument, "input is required");
  if (!std::filesystem::is_regular_file(input)) {
    throw Error(ErrorCode::InvalidArgument, "input does not exist: " + input.string());
  }
  if (gt && !std::filesystem::is_regular_file(*gt)) {
    throw Error(ErrorCode::InvalidArgument, "gt does not exist: " + gt->string());
  }
  if (out_mesh.empty()) throw Error(ErrorCode::InvalidArgument, "out_mesh is required");
  check_writable(out_mesh, "out_mesh");
  if (!out_grid.empty()) check_writable(out_grid, "out_grid");
  if (!report.empty()) check_writable(report, "report");
  if (screen_count < 1 || grad_count < 1) throw Error(ErrorCode::InvalidArgument, "sample counts must be >= 1");
  if (disk_radius < 0.0) throw Error(ErrorCode::InvalidArgument, "disk_radius must be >= 0");
  if (!(eval_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "eval_threshold must be > 0");
  if (eval_samples < 1) throw Error(ErrorCode::InvalidArgument, "eval_samples must be >= 1");
  energy.validate();
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open config " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(std::string_view(line).substr(0, eq))] = trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

void apply_key_values(PipelineConfig& c, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "input") {
      c.input = value;
    } else if (key == "out_mesh") {
      c.out_mesh = value;
    } else if (key == "out_grid") {
      c.out_grid = value;
    } else if (key == "report") {
      c.report = value;
    } else if (key == "gt") {
      if (value.empty()) c.gt.reset();
      else c.gt = value;
    } else if (key == "screen_strategy") {
      c.screen_strategy = parse_strategy(value);
    } else if (key == "grad_strategy") {
      c.grad_strategy = parse_strategy(value);
    } else if (key == "screen_count") {
      c.screen_count = parse_count(key, value);
    } else if (key == "grad_count") {
      c.grad_count = parse_count(key, value);
    } else if (key == "disk_radius") {
      c.disk_radius = parse_double(key, value);
    } else if (key == "seed") {
      c.seed = std::uint64_t(parse_int(key, value));
    } else if (key == "w0") {
      c.energy.w0 = parse_double(key, value);
    } else if (key == "w1") {
      c.energy.w1 = parse_double(key, value);
    } else if (key == "band_radius" || key == "band") {
      c.energy.band_radius = int(parse_int(key, value));
    } else if (key == "cg_tol" || key == "tol") {
      c.energy.cg_tol = parse_double(key, value);
    } else if (key == "cg_max_iters") {
      c.energy.cg_max_iters = int(parse_int(key, value));
    } else if (key == "resolutions" || key == "res") {
      c.energy.resolutions = parse_list(key, value);
    } else if (key == "eval_threshold") {
      c.eval_threshold = parse_double(key, value);
    } else if (key == "eval_samples") {
      c.eval_samples = parse_count(key, value);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
    }
  }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  PipelineConfig c;
  apply_key_values(c, read_key_values(path));
  return c;
}

void Report::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Report::set(const std::string& key, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  set(key, std::string(buf, res.ptr));
}

void Report::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }

std::optional<std::string> Report::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  return std::nullopt;
}

std::string Report::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  PipelineResult res;
  Report& rep = res.report;
  try {
    config.validate();
  } catch (const std::exception& e) {
    res.exit_code = 2;
    res.failed_stage = "config";
    res.message = e.what();
    return res;
  }

  std::string stage;
  const auto total_start = Clock::now();
  auto run_stage = [&](const std::string& name, auto&& fn) {
    stage = name;
    const auto t0 = Clock::now();
    fn();
    const double ms = elapsed_ms(t0);
    rep.set("time_ms." + name, ms);
    spdlog::info("stage {} done in {:.1f} ms", name, ms);
  };

  try {
    TriangleMesh source;
    OrientedPointCloud screen, grad;
    MultiresResult solved;
    IsoSurface surface;

    run_stage("load", [&] {
      LoadReport lr;
      source = load_mesh(config.input, &lr);
      if (!source.has_normals()) source = compute_vertex_normals(source);
      rep.set("input.vertices", source.vertices.size());
      rep.set("input.faces", source.faces.size());
      rep.set("input.dropped_degenerate", lr.dropped_degenerate);
    });

    run_stage("sample_screen", [&] {
      SamplerConfig sc{config.screen_strategy, config.screen_count, stage_seed(config.seed, 0), config.disk_radius};
      screen = sample(source, sc);
      rep.set("screen.points", screen.size());
    });

    run_stage("sample_grad", [&] {
      SamplerConfig gc{config.grad_strategy, config.grad_count, stage_seed(config.seed, 1), config.disk_radius};
      try {
        grad = sample(source, gc);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroCurvature) throw;
        spdlog::warn("mesh has no curvature; sampling gradient points by area");
        gc.strategy = SamplingStrategy::Area;
        grad = sample(source, gc);
        rep.set("grad.fallback", std::string("area"));
      }
      rep.set("grad.points", grad.size());
    });

    run_stage("solve", [&] {
      Aabb box = bounds(screen);
      box.extend(bounds(grad));
      solved = solve_multires(screen, grad, config.energy, box);
      for (std::size_t l = 0; l < solved.levels.size(); ++l) {
        const auto& lv = solved.levels[l];
        const std::string p = "level" + std::to_string(l) + ".";
        rep.set(p + "voxel_size", lv.voxel_size);
        rep.set(p + "active_voxels", lv.active_voxels);
        rep.set(p + "iterations", lv.iterations);
        rep.set(p + "converged", lv.converged);
        rep.set(p + "start_energy", lv.start_energy);
        rep.set(p + "final_energy", lv.final_energy);
        rep.set(p + "time_ms", lv.milliseconds);
      }
      rep.set("solve.converged", solved.converged);
    });

    run_stage("extract", [&] {
      surface = marching_cubes(solved.grid);
      rep.set("mesh.vertices", surface.mesh.vertices.size());
      rep.set("mesh.faces", surface.mesh.faces.size());
      rep.set("mesh.no_surface", surface.no_surface);
    });

    run_stage("write", [&] {
      save_mesh(surface.mesh, config.out_mesh);
      if (!config.out_grid.empty()) save_grid(solved.grid, config.out_grid);
    });

    if (config.gt) {
      run_stage("eval", [&] {
        if (surface.mesh.empty()) throw Error(ErrorCode::EmptyMesh, "no surface to evaluate");
        const TriangleMesh gt = load_mesh(*config.gt);
        const auto m = eval_3d(surface.mesh, gt, config.eval_threshold, config.eval_samples, stage_seed(config.seed, 2));
        rep.set("eval.threshold", m.threshold);
        rep.set("eval.precision", m.precision);
        rep.set("eval.recall", m.recall);
        rep.set("eval.fscore", m.fscore);
      });
    }
    rep.set("time_ms.total", elapsed_ms(total_start));
  } catch (const std::exception& e) {
    res.exit_code = 1;
    res.failed_stage = stage;
    res.message = e.what();
    rep.set("failed_stage", stage);
    spdlog::error("stage {} failed: {}", stage, e.what());
  }

  rep.set("exit_code", res.exit_code);
  if (!config.report.empty()) {
    std::ofstream out(config.report);
    out << rep.str();
    if (!out) {
      spdlog::error("cannot write report {}", config.report.string());
      if (res.exit_code == 0) {
        res.exit_code = 1;
        res.failed_stage = "report";
        res.message = "cannot write report";
      }
    }
  }
  return res;
}

}  // namespace gradsurf
