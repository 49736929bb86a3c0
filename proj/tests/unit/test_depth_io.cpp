#include <doctest.h>

#include <fstream>

#include "gradsurf/depth_io.hpp"
#include "gradsurf/error.hpp"
#include "support.hpp"

using namespace gradsurf;
using namespace gradsurf::testing;

TEST_CASE("16-bit PNG depth stores millimeters") {
  TempDir dir("depth");
  DepthImage d(7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) d.at(x, y) = (x + 10 * y) * 0.0371;
  d.at(0, 0) = 0.0;
  d.at(1, 0) = 70.0;  // beyond 65.535 m saturates
  save_depth(d, dir / "d.png");
  const auto back = load_depth(dir / "d.png");
  REQUIRE(back.width == 7);
  REQUIRE(back.height == 5);
  CHECK(back.at(0, 0) == 0.0);
  CHECK(back.at(1, 0) == doctest::Approx(65.535));
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      if (!(x == 1 && y == 0)) CHECK(std::abs(back.at(x, y) - d.at(x, y)) <= 0.0005 + 1e-12);
}

TEST_CASE("raw depth round trip keeps float precision") {
  TempDir dir("depth");
  std::mt19937_64 rng(3);
  DepthImage d(9, 4);
  for (auto& v : d.values) v = float(uniform(rng, 0.0, 8.0));
  save_depth(d, dir / "d.depth");
  const auto back = load_depth(dir / "d.depth");
  CHECK(back.values == d.values);
  std::ofstream(dir / "bad.depth") << "GRADSURF-DEPTH v1\n";
  CHECK_THROWS_AS(load_depth(dir / "bad.depth"), Error);
  std::ofstream(dir / "bad.png") << "not a png";
  CHECK_THROWS_AS(load_depth(dir / "bad.png"), Error);
  CHECK_THROWS_AS(load_depth(dir / "missing.png"), Error);
}

TEST_CASE("trajectory round trip") {
  TempDir dir("traj");
  std::vector<CameraView> views(3);
  for (int i = 0; i < 3; ++i) {
    auto& v = views[std::size_t(i)];
    v.width = 64;
    v.height = 48;
    v.intrinsics << 50.5, 0, 31.5, 0, 51.25, 23.5, 0, 0, 1;
    v.pose.topLeftCorner<3, 3>() = Eigen::AngleAxisd(0.3 * i, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    v.pose.topRightCorner<3, 1>() = Vec3(i, -i, 0.5 * i);
  }
  save_trajectory(views, dir / "t.txt");
  const auto back = load_trajectory(dir / "t.txt");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].width == 64);
    CHECK(back[i].height == 48);
    CHECK(back[i].intrinsics == views[i].intrinsics);
    CHECK(back[i].pose == views[i].pose);
  }
  std::ofstream(dir / "short.txt") << "500 500 320 240 640 480\n1 0 0 0 0 1 0 0\n";
  CHECK_THROWS_AS(load_trajectory(dir / "short.txt"), Error);
}
