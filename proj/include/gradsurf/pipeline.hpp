#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gradsurf/sampling.hpp"
#include "gradsurf/solver.hpp"

namespace gradsurf {

struct PipelineConfig {
  std::filesystem::path input;     // mesh to sample from
  std::filesystem::path out_mesh;  // extracted surface (PLY)
  std::filesystem::path out_grid;  // finest chi grid; empty to skip
  std::filesystem::path report;    // key=value report; empty for stdout
  std::optional<std::filesystem::path> gt;  // evaluate against this mesh if set

  SamplingStrategy screen_strategy = SamplingStrategy::PoissonDisk;
  SamplingStrategy grad_strategy = SamplingStrategy::Curvature;
  std::size_t screen_count = 200000;
  std::size_t grad_count = 200000;
  double disk_radius = 0.0;  // <= 0: derived from area and screen_count
  std::uint64_t seed = 0;

  EnergyParams energy;
  double eval_threshold = 0.05;
  std::size_t eval_samples = 200000;

  // Throws Error(InvalidArgument) for bad ranges and missing input files.
  void validate() const;
};

// Flat key=value text, '#' comments. Unknown keys are an error.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void apply_key_values(PipelineConfig& config, const std::map<std::string, std::string>& kv);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Ordered key=value lines.
class Report {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::size_t value) { set(key, std::int64_t(value)); }
  void set(const std::string& key, int value) { set(key, std::int64_t(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  std::optional<std::string> get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string str() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct PipelineResult {
  int exit_code = 0;  // 0 ok, 1 runtime failure, 2 config error
  std::string failed_stage;
  std::string message;
  Report report;
};

// sample -> solve_multires -> marching_cubes -> (eval_3d). Config errors are
// reported before any file is written.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace gradsurf
