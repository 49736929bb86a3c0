#include "gradsurf/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gradsurf {

namespace {

constexpr std::int32_t kLeafFaces = 4;

bool closer(double t, std::int32_t face, const std::optional<RayHit>& best) {
  return !best || t < best->t || (t == best->t && face < best->face);
}

// Entry distance into the box, or nullopt on a miss.
std::optional<double> ray_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  return tmin;
}

}  // namespace

std::optional<double> intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                         const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-300) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (!(t > 0.0)) return std::nullopt;
  return t;
}

Bvh::Bvh(const TriangleMesh& mesh) : mesh_(&mesh) {
  const std::size_t nf = mesh.faces.size();
  faces_.resize(nf);
  std::iota(faces_.begin(), faces_.end(), 0);
  centroids_.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& t = mesh.faces[f];
    centroids_[f] = (mesh.vertices[std::size_t(t[0])] + mesh.vertices[std::size_t(t[1])] +
                     mesh.vertices[std::size_t(t[2])]) / 3.0;
  }
  if (nf > 0) build(0, std::int32_t(nf));
}

std::int32_t Bvh::build(std::int32_t begin, std::int32_t end) {
  const auto id = std::int32_t(nodes_.size());
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (std::int32_t i = begin; i < end; ++i) {
    for (int idx : mesh_->faces[std::size_t(faces_[std::size_t(i)])]) {
      node.lo = node.lo.cwiseMin(mesh_->vertices[std::size_t(idx)]);
      node.hi = node.hi.cwiseMax(mesh_->vertices[std::size_t(idx)]);
    }
  }
  // Slight inflation keeps the slab test conservative under rounding.
  const Vec3 pad = 1e-9 * (node.hi - node.lo).cwiseAbs() + Vec3::Constant(1e-12);
  node.lo -= pad;
  node.hi += pad;
  node.begin = begin;
  node.end = end;
  nodes_.push_back(node);
  if (end - begin <= kLeafFaces) return id;

  Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity()), chi = -clo;
  for (std::int32_t i = begin; i < end; ++i) {
    clo = clo.cwiseMin(centroids_[std::size_t(faces_[std::size_t(i)])]);
    chi = chi.cwiseMax(centroids_[std::size_t(faces_[std::size_t(i)])]);
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const std::int32_t mid = begin + (end - begin) / 2;
  std::nth_element(faces_.begin() + begin, faces_.begin() + mid, faces_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) {
                     const double ca = centroids_[std::size_t(a)][axis], cb = centroids_[std::size_t(b)][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[std::size_t(id)].left = left;
  nodes_[std::size_t(id)].right = right;
  return id;
}

std::optional<RayHit> Bvh::closest_hit(const Vec3& origin, const Vec3& dir) const {
  std::optional<RayHit> best;
  if (nodes_.empty()) return best;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[std::size_t(stack[--top])];
    const auto entry = ray_box(origin, dir, node.lo, node.hi);
    if (!entry || (best && *entry > best->t)) continue;
    if (node.left < 0) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const std::int32_t f = faces_[std::size_t(i)];
        const auto& t = mesh_->faces[std::size_t(f)];
        const auto hit = intersect_triangle(origin, dir, mesh_->vertices[std::size_t(t[0])],
                                            mesh_->vertices[std::size_t(t[1])],
                                            mesh_->vertices[std::size_t(t[2])]);
        if (hit && closer(*hit, f, best)) best = RayHit{*hit, f};
      }
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  return best;
}

std::optional<RayHit> closest_hit_brute_force(const TriangleMesh& mesh, const Vec3& origin,
                                              const Vec3& dir) {
  std::optional<RayHit> best;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    const auto hit = intersect_triangle(origin, dir, mesh.vertices[std::size_t(t[0])],
                                        mesh.vertices[std::size_t(t[1])], mesh.vertices[std::size_t(t[2])]);
    if (hit && closer(*hit, std::int32_t(f), best)) best = RayHit{*hit, std::int32_t(f)};
  }
  return best;
}

}  // namespace gradsurf
