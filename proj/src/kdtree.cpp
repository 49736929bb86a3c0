#include "gradsurf/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace gradsurf {

namespace {
constexpr std::int32_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, std::int32_t(points_.size()));
  }
}

std::int32_t KdTree::build(std::int32_t begin, std::int32_t end) {
  const auto id = std::int32_t(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::int32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[std::size_t(order_[std::size_t(i)])]);
    hi = hi.cwiseMax(points_[std::size_t(order_[std::size_t(i)])]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::int32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     const double pa = points_[std::size_t(a)][axis], pb = points_[std::size_t(b)][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[std::size_t(order_[std::size_t(mid)])][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& n = nodes_[std::size_t(id)];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

void KdTree::search(std::int32_t node_id, const Vec3& q, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[std::size_t(node_id)];
  if (node.axis < 0) {
    for (std::int32_t i = node.begin; i < node.end; ++i) {
      const std::int32_t idx = order_[std::size_t(i)];
      const Neighbor cand{(points_[std::size_t(idx)] - q).squaredNorm(), idx};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  // Points equal to the split value can sit on either side, hence <=.
  if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, heap);
}

KdTree::Neighbor KdTree::nearest(const Vec3& q) const {
  auto r = knn(q, 1);
  return r.empty() ? Neighbor{std::numeric_limits<double>::infinity(), -1} : r.front();
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec3& q, std::size_t k) const {
  std::vector<Neighbor> heap;
  if (nodes_.empty() || k == 0) return heap;
  heap.reserve(k + 1);
  search(0, q, std::min(k, points_.size()), heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

}  // namespace gradsurf
