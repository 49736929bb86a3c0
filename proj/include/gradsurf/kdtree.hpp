#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gradsurf/types.hpp"

namespace gradsurf {

// Exact nearest-neighbor queries over a static point set.
class KdTree {
 public:
  struct Neighbor {
    double dist2;
    std::int32_t index;
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
      return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  Neighbor nearest(const Vec3& q) const;
  // k closest points, ascending by (distance, index).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const;

 private:
  struct Node {
    std::int32_t begin, end;  // range in order_
    std::int32_t left = -1, right = -1;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);
  void search(std::int32_t node, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const;

  std::vector<Vec3> points_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace gradsurf
