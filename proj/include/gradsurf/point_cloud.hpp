#pragma once

#include <filesystem>
#include <limits>
#include <vector>

#include "gradsurf/types.hpp"

namespace gradsurf {

struct OrientedPointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void reserve(std::size_t n) {
    points.reserve(n);
    normals.reserve(n);
  }
  void push_back(const Vec3& p, const Vec3& n) {
    points.push_back(p);
    normals.push_back(n);
  }
};

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool valid() const { return (min.array() <= max.array()).all(); }
  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
};

Aabb bounds(const OrientedPointCloud& cloud);

// PLY with float32 x,y,z,nx,ny,nz per vertex, binary little endian.
void save_cloud(const OrientedPointCloud& cloud, const std::filesystem::path& path);
// Accepts any PLY the mesh loader accepts; the vertex normals become the cloud normals.
OrientedPointCloud load_cloud(const std::filesystem::path& path);

}  // namespace gradsurf
