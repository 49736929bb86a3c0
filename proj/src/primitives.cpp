#include "gradsurf/primitives.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "gradsurf/error.hpp"

namespace gradsurf {

TriangleMesh make_icosphere(const Vec3& center, double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> unit = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                            {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                            {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : unit) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      unit.push_back((unit[std::size_t(a)] + unit[std::size_t(b)]).normalized());
      const int idx = int(unit.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriangleMesh m;
  m.faces = std::move(faces);
  m.vertices.reserve(unit.size());
  for (const Vec3& u : unit) m.vertices.push_back(center + radius * u);
  m.vertex_normals = std::move(unit);
  return m;
}

TriangleMesh make_cube(const Vec3& min_corner, double size) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back(min_corner + size * Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1));
  }
  // Two triangles per face, counterclockwise seen from outside.
  m.faces = {{0, 2, 3}, {0, 3, 1},   // z = 0
             {4, 5, 7}, {4, 7, 6},   // z = 1
             {0, 1, 5}, {0, 5, 4},   // y = 0
             {2, 6, 7}, {2, 7, 3},   // y = 1
             {0, 4, 6}, {0, 6, 2},   // x = 0
             {1, 3, 7}, {1, 7, 5}};  // x = 1
  return m;
}

TriangleMesh make_plane(double x0, double y0, double x1, double y1, double height, int cells_x,
                        int cells_y) {
  if (cells_x < 1 || cells_y < 1) throw Error(ErrorCode::InvalidArgument, "plane needs cells");
  TriangleMesh m;
  for (int j = 0; j <= cells_y; ++j) {
    for (int i = 0; i <= cells_x; ++i) {
      m.vertices.emplace_back(x0 + (x1 - x0) * i / cells_x, y0 + (y1 - y0) * j / cells_y, height);
      m.vertex_normals.push_back(Vec3::UnitZ());
    }
  }
  const int row = cells_x + 1;
  for (int j = 0; j < cells_y; ++j) {
    for (int i = 0; i < cells_x; ++i) {
      const int a = j * row + i;
      m.faces.push_back({a, a + 1, a + row + 1});
      m.faces.push_back({a, a + row + 1, a + row});
    }
  }
  return m;
}

TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts) {
  TriangleMesh m;
  bool normals = !parts.empty();
  for (const auto& p : parts) normals = normals && p.has_normals();
  for (const auto& p : parts) {
    const int base = int(m.vertices.size());
    m.vertices.insert(m.vertices.end(), p.vertices.begin(), p.vertices.end());
    if (normals) m.vertex_normals.insert(m.vertex_normals.end(), p.vertex_normals.begin(), p.vertex_normals.end());
    for (auto f : p.faces) {
      for (int& idx : f) idx += base;
      m.faces.push_back(f);
    }
  }
  return m;
}

}  // namespace gradsurf
