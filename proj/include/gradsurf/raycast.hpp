#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gradsurf/mesh.hpp"

namespace gradsurf {

// Moller-Trumbore, two-sided. Returns the ray parameter t > 0 of the hit.
std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                         const Vec3& b, const Vec3& c);

struct RayHit {
  double t;
  std::int32_t face;
};

// Bounding-volume hierarchy over a triangle mesh (median split on the
// longest centroid axis). Hits are decided by intersect_triangle, so the
// result equals testing every triangle.
class Bvh {
 public:
  explicit Bvh(const TriangleMesh& mesh);

  std::optional<RayHit> closest_hit(const Vec3& origin, const Vec3& dir) const;

 private:
  struct Node {
    Vec3 lo, hi;
    std::int32_t left = -1, right = -1;
    std::int32_t begin = 0, end = 0;
  };
  std::int32_t build(std::int32_t begin, std::int32_t end);

  const TriangleMesh* mesh_;
  std::vector<std::int32_t> faces_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
};

std::optional<RayHit> closest_hit_brute_force(const TriangleMesh& mesh, const Vec3& origin,
                                              const Vec3& dir);

}  // namespace gradsurf
