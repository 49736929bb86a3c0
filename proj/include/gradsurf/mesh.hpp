#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "gradsurf/types.hpp"

namespace gradsurf {

enum class MeshFormat { Ply, Obj };

// Indexed triangle set. Faces are counterclockwise when seen from the side
// the normal points to.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec3> vertex_normals;  // empty, or one unit vector per vertex

  bool has_normals() const { return !vertex_normals.empty(); }
  bool empty() const { return faces.empty(); }

  double face_area(std::size_t f) const;
  Vec3 face_normal(std::size_t f) const;  // unit, zero for degenerate faces
  double total_area() const;
};

struct TriangleCurvature {
  std::vector<double> per_face;
  std::vector<double> cumulative;  // inclusive prefix sum of per_face

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

struct LoadReport {
  std::size_t dropped_degenerate = 0;
  std::size_t fan_triangulated = 0;  // polygons with more than 3 corners
};

inline constexpr double kDegenerateArea = 1e-12;

// Guesses the format from the extension (.ply / .obj).
MeshFormat format_from_path(const std::filesystem::path& path);

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format,
                       LoadReport* report = nullptr);
TriangleMesh load_mesh(const std::filesystem::path& path, LoadReport* report = nullptr);

enum class PlyEncoding { Ascii, BinaryLittleEndian };

// Binary PLY stores positions as float64 so a save/load round trip is exact.
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format,
               PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path);

// Area-weighted average of incident face normals, normalized.
[[nodiscard]] TriangleMesh compute_vertex_normals(const TriangleMesh& mesh);

// Per-face normal variation: sum over the three edges of
// |(N_a - N_b) / |e_ab||^2, times the face area.
TriangleCurvature triangle_curvature(const TriangleMesh& mesh);

// Throws ParseError if any invariant is broken.
void validate(const TriangleMesh& mesh);

}  // namespace gradsurf
