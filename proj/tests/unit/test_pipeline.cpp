#include <doctest.h>

#include <fstream>
#include <sstream>

#include "gradsurf/error.hpp"
#include "gradsurf/pipeline.hpp"
#include "gradsurf/primitives.hpp"
#include "support.hpp"

using namespace gradsurf;
using namespace gradsurf::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig sphere_config(const TempDir& dir) {
  save_mesh(make_icosphere(Vec3::Zero(), 0.5, 4), dir / "sphere.ply");
  PipelineConfig c;
  c.input = dir / "sphere.ply";
  c.out_mesh = dir / "out.ply";
  c.out_grid = dir / "out.gsg";
  c.report = dir / "report.txt";
  c.gt = dir / "sphere.ply";
  c.screen_count = 20000;
  c.grad_count = 20000;
  c.energy.resolutions = {0.08, 0.04};
  c.eval_threshold = 0.04;
  c.eval_samples = 20000;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("key=value config") {
  TempDir dir("cfg");
  std::ofstream(dir / "a.cfg") << "# comment\ninput = in.ply\nres = 0.2, 0.1\nw0=2.5\nseed=42\n\ngrad_strategy=area  # trailing\n";
  const auto c = load_pipeline_config(dir / "a.cfg");
  CHECK(c.input == "in.ply");
  CHECK(c.energy.resolutions == std::vector<double>{0.2, 0.1});
  CHECK(c.energy.w0 == 2.5);
  CHECK(c.seed == 42);
  CHECK(c.grad_strategy == SamplingStrategy::Area);
  std::ofstream(dir / "b.cfg") << "colour=blue\n";
  CHECK_THROWS_AS(load_pipeline_config(dir / "b.cfg"), Error);
  std::ofstream(dir / "c.cfg") << "w1=heavy\n";
  CHECK_THROWS_AS(load_pipeline_config(dir / "c.cfg"), Error);
  std::ofstream(dir / "d.cfg") << "just words\n";
  CHECK_THROWS_AS(load_pipeline_config(dir / "d.cfg"), Error);
}

TEST_CASE("report formatting") {
  Report r;
  r.set("a", 0.1);
  r.set("b", std::int64_t(3));
  r.set("c", true);
  r.set("a", 0.25);
  CHECK(r.str() == "a=0.25\nb=3\nc=true\n");
  CHECK(r.get("b") == "3");
  CHECK_FALSE(r.get("z"));
}

TEST_CASE("missing input is a config error with no outputs") {
  TempDir dir("pipe");
  PipelineConfig c;
  c.input = dir / "nope.ply";
  c.out_mesh = dir / "out.ply";
  c.report = dir / "report.txt";
  const auto res = run_pipeline(c);
  CHECK(res.exit_code == 2);
  CHECK(res.failed_stage == "config");
  CHECK_FALSE(std::filesystem::exists(dir / "out.ply"));
  CHECK_FALSE(std::filesystem::exists(dir / "report.txt"));
}

TEST_CASE("sphere end to end") {
  TempDir dir("pipe");
  const auto c = sphere_config(dir);
  const auto res = run_pipeline(c);
  REQUIRE(res.exit_code == 0);
  const auto& r = res.report;
  REQUIRE(r.get("eval.fscore"));
  CHECK(std::stod(*r.get("eval.fscore")) >= 0.95);
  for (const char* stage : {"load", "sample_screen", "sample_grad", "solve", "extract", "write", "eval", "total"}) {
    CHECK(r.get(std::string("time_ms.") + stage));
  }
  CHECK(r.get("level1.final_energy"));
  CHECK(std::filesystem::exists(c.out_grid));
  CHECK(slurp(c.report) == r.str());
  const auto mesh = load_mesh(c.out_mesh);
  CHECK(mesh.faces.size() > 1000);
}

TEST_CASE("same seed gives a byte-identical mesh") {
  TempDir dir("pipe");
  auto c = sphere_config(dir);
  c.gt.reset();
  c.screen_count = c.grad_count = 5000;
  REQUIRE(run_pipeline(c).exit_code == 0);
  const auto first = slurp(c.out_mesh);
  REQUIRE(run_pipeline(c).exit_code == 0);
  CHECK(slurp(c.out_mesh) == first);
  c.seed += 1;
  REQUIRE(run_pipeline(c).exit_code == 0);
  CHECK(slurp(c.out_mesh) != first);
}

TEST_CASE("flat input falls back to area sampling for gradients") {
  TempDir dir("pipe");
  save_mesh(make_plane(0, 0, 1, 1, 0, 4, 4), dir / "plane.ply");
  PipelineConfig c;
  c.input = dir / "plane.ply";
  c.out_mesh = dir / "out.ply";
  c.screen_count = c.grad_count = 2000;
  c.energy.resolutions = {0.1, 0.05};
  const auto res = run_pipeline(c);
  CHECK(res.exit_code == 0);
  CHECK(res.report.get("grad.fallback") == "area");
}

TEST_CASE("input without vertex normals gets them computed") {
  TempDir dir("pipe");
  const auto cube = make_cube(Vec3::Zero(), 1.0);
  REQUIRE_FALSE(cube.has_normals());
  save_mesh(cube, dir / "cube.obj");
  PipelineConfig c;
  c.input = dir / "cube.obj";
  c.out_mesh = dir / "out.ply";
  c.screen_count = c.grad_count = 4000;
  c.energy.resolutions = {0.2, 0.1};
  const auto res = run_pipeline(c);
  CHECK(res.exit_code == 0);
  CHECK(std::filesystem::exists(c.out_mesh));
}

TEST_CASE("stage failures name the stage") {
  TempDir dir("pipe");
  std::ofstream(dir / "broken.ply") << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\nnope\n";
  PipelineConfig c;
  c.input = dir / "broken.ply";
  c.out_mesh = dir / "out.ply";
  const auto res = run_pipeline(c);
  CHECK(res.exit_code == 1);
  CHECK(res.failed_stage == "load");
  CHECK(res.report.get("failed_stage") == "load");
}
