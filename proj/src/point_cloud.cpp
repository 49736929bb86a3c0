#include "gradsurf/point_cloud.hpp"

#include <fstream>

#include "gradsurf/error.hpp"
#include "gradsurf/mesh.hpp"
#include "ply.hpp"

namespace gradsurf {

Aabb bounds(const OrientedPointCloud& cloud) {
  Aabb b;
  for (const Vec3& p : cloud.points) b.extend(p);
  return b;
}

void save_cloud(const OrientedPointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) ply::write_le(out, float(cloud.points[i][a]));
    for (int a = 0; a < 3; ++a) ply::write_le(out, float(cloud.normals[i][a]));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

OrientedPointCloud load_cloud(const std::filesystem::path& path) {
  TriangleMesh m = load_mesh(path, MeshFormat::Ply);
  if (!m.has_normals()) {
    throw Error(ErrorCode::ParseError, path.string() + " has no usable nx/ny/nz normals");
  }
  OrientedPointCloud cloud;
  cloud.points = std::move(m.vertices);
  cloud.normals = std::move(m.vertex_normals);
  return cloud;
}

}  // namespace gradsurf
