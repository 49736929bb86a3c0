#include "gradsurf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "gradsurf/error.hpp"
#include "gradsurf/parallel.hpp"
#include "ply.hpp"

namespace gradsurf {

namespace {

Vec3 face_cross(const TriangleMesh& m, std::size_t f) {
  const auto& t = m.faces[f];
  const Vec3& a = m.vertices[std::size_t(t[0])];
  const Vec3& b = m.vertices[std::size_t(t[1])];
  const Vec3& c = m.vertices[std::size_t(t[2])];
  return (b - a).cross(c - a);
}

void check_indices(const TriangleMesh& m) {
  const auto nv = std::int64_t(m.vertices.size());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    for (int idx : m.faces[f]) {
      if (idx < 0 || idx >= nv) {
        throw Error(ErrorCode::ParseError, "face " + std::to_string(f) + " references vertex " +
                                               std::to_string(idx) + " of " +
                                               std::to_string(nv));
      }
    }
  }
}

// Drops zero-area faces and normalizes supplied normals.
void clean(TriangleMesh& m, LoadReport& report) {
  check_indices(m);
  std::vector<std::array<int, 3>> kept;
  kept.reserve(m.faces.size());
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    if (0.5 * face_cross(m, f).norm() >= kDegenerateArea) kept.push_back(m.faces[f]);
  }
  report.dropped_degenerate = m.faces.size() - kept.size();
  m.faces = std::move(kept);

  if (m.has_normals()) {
    if (m.vertex_normals.size() != m.vertices.size()) {
      throw Error(ErrorCode::ParseError, "normal count does not match vertex count");
    }
    bool usable = true;
    for (Vec3& n : m.vertex_normals) {
      const double len = n.norm();
      if (!(len > 1e-12) || !std::isfinite(len)) {
        usable = false;
        break;
      }
      n /= len;
    }
    if (!usable) {
      spdlog::warn("mesh has zero or non-finite vertex normals; discarding them");
      m.vertex_normals.clear();
    }
  }
  if (report.dropped_degenerate > 0) {
    spdlog::info("dropped {} degenerate faces", report.dropped_degenerate);
  }
}

void append_polygon(TriangleMesh& m, const std::vector<int>& poly, LoadReport& report) {
  if (poly.size() < 3) throw Error(ErrorCode::ParseError, "face with fewer than 3 vertices");
  if (poly.size() > 3) ++report.fan_triangulated;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    m.faces.push_back({poly[0], poly[i], poly[i + 1]});
  }
}

TriangleMesh load_ply(const std::filesystem::path& path, LoadReport& report) {
  const ply::File file = ply::read(path);
  TriangleMesh m;
  const ply::ElementData* vertex = file.find("vertex");
  if (vertex == nullptr) throw Error(ErrorCode::ParseError, "PLY has no vertex element");
  const int x = vertex->find("x"), y = vertex->find("y"), z = vertex->find("z");
  if (x < 0 || y < 0 || z < 0) throw Error(ErrorCode::ParseError, "PLY vertex lacks x/y/z");
  const std::size_t nv = vertex->element.count;
  m.vertices.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    m.vertices[i] = Vec3(vertex->scalars[std::size_t(x)][i], vertex->scalars[std::size_t(y)][i],
                         vertex->scalars[std::size_t(z)][i]);
  }
  const int nx = vertex->find("nx"), ny = vertex->find("ny"), nz = vertex->find("nz");
  if (nx >= 0 && ny >= 0 && nz >= 0) {
    m.vertex_normals.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      m.vertex_normals[i] =
          Vec3(vertex->scalars[std::size_t(nx)][i], vertex->scalars[std::size_t(ny)][i],
               vertex->scalars[std::size_t(nz)][i]);
    }
  }
  if (const ply::ElementData* face = file.find("face")) {
    int idx = face->find("vertex_indices");
    if (idx < 0) idx = face->find("vertex_index");
    if (idx < 0 || !face->element.properties[std::size_t(idx)].is_list) {
      throw Error(ErrorCode::ParseError, "PLY face lacks a vertex_indices list");
    }
    const auto& offsets = face->list_offsets[std::size_t(idx)];
    const auto& values = face->lists[std::size_t(idx)];
    m.faces.reserve(face->element.count);
    std::vector<int> poly;
    for (std::size_t f = 0; f < face->element.count; ++f) {
      poly.assign(values.begin() + std::ptrdiff_t(offsets[f]),
                  values.begin() + std::ptrdiff_t(offsets[f + 1]));
      append_polygon(m, poly, report);
    }
  }
  return m;
}

// OBJ indices are 1-based; negative values count back from the end.
int resolve_obj_index(long long idx, std::size_t count) {
  if (idx > 0) return int(idx - 1);
  if (idx < 0) return int(std::int64_t(count) + idx);
  throw Error(ErrorCode::ParseError, "OBJ index 0");
}

TriangleMesh load_obj(const std::filesystem::path& path, LoadReport& report) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  TriangleMesh m;
  std::vector<Vec3> normals;
  // Per vertex, the normal index referenced by faces (-1 if none).
  std::vector<int> vertex_normal_ref;
  bool consistent_normals = true;
  std::string line;
  std::size_t lineno = 0;
  std::vector<int> poly;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty() || key[0] == '#') continue;
    if (key == "v" || key == "vn") {
      double a, b, c;
      if (!(ls >> a >> b >> c)) {
        throw Error(ErrorCode::ParseError, "bad '" + key + "' at line " + std::to_string(lineno));
      }
      if (key == "v") {
        m.vertices.emplace_back(a, b, c);
      } else {
        normals.emplace_back(a, b, c);
      }
    } else if (key == "f") {
      poly.clear();
      std::string tok;
      vertex_normal_ref.resize(m.vertices.size(), -1);
      while (ls >> tok) {
        // v, v/t, v//n, v/t/n
        const auto s1 = tok.find('/');
        long long vi = 0;
        try {
          vi = std::stoll(tok.substr(0, s1));
        } catch (...) {
          throw Error(ErrorCode::ParseError, "bad face token '" + tok + "' at line " +
                                                 std::to_string(lineno));
        }
        const int v = resolve_obj_index(vi, m.vertices.size());
        poly.push_back(v);
        if (s1 != std::string::npos) {
          const auto s2 = tok.find('/', s1 + 1);
          if (s2 != std::string::npos && s2 + 1 < tok.size()) {
            long long ni = 0;
            try {
              ni = std::stoll(tok.substr(s2 + 1));
            } catch (...) {
              throw Error(ErrorCode::ParseError, "bad face token '" + tok + "' at line " +
                                                     std::to_string(lineno));
            }
            const int n = resolve_obj_index(ni, normals.size());
            if (n < 0 || std::size_t(n) >= normals.size()) {
              throw Error(ErrorCode::ParseError, "normal index out of range at line " +
                                                     std::to_string(lineno));
            }
            if (v >= 0 && std::size_t(v) < vertex_normal_ref.size()) {
              int& ref = vertex_normal_ref[std::size_t(v)];
              if (ref >= 0 && ref != n && normals[std::size_t(ref)] != normals[std::size_t(n)]) {
                consistent_normals = false;
              }
              ref = n;
            }
          }
        }
      }
      append_polygon(m, poly, report);
    }
    // Other statements (vt, o, g, usemtl, s, ...) are ignored.
  }
  if (!normals.empty()) {
    vertex_normal_ref.resize(m.vertices.size(), -1);
    const bool all_referenced = std::all_of(vertex_normal_ref.begin(), vertex_normal_ref.end(),
                                            [&](int r) { return r >= 0 && std::size_t(r) < normals.size(); });
    if (all_referenced && consistent_normals) {
      m.vertex_normals.resize(m.vertices.size());
      for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        m.vertex_normals[i] = normals[std::size_t(vertex_normal_ref[i])];
      }
    } else if (normals.size() == m.vertices.size() && !all_referenced) {
      m.vertex_normals = normals;
    } else {
      spdlog::warn("{}: OBJ normals are not per-vertex; they will be recomputed", path.string());
    }
  }
  return m;
}

void save_ply(const TriangleMesh& m, const std::filesystem::path& path, PlyEncoding enc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const bool normals = m.has_normals();
  out << "ply\nformat " << (enc == PlyEncoding::Ascii ? "ascii" : "binary_little_endian")
      << " 1.0\n";
  out << "element vertex " << m.vertices.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "element face " << m.faces.size() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  if (enc == PlyEncoding::Ascii) {
    char buf[128];
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      const Vec3& v = m.vertices[i];
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
      out << buf;
      if (normals) {
        const Vec3& n = m.vertex_normals[i];
        std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g", n.x(), n.y(), n.z());
        out << buf;
      }
      out << '\n';
    }
    for (const auto& f : m.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  } else {
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      for (int a = 0; a < 3; ++a) ply::write_le(out, m.vertices[i][a]);
      if (normals) {
        for (int a = 0; a < 3; ++a) ply::write_le(out, m.vertex_normals[i][a]);
      }
    }
    for (const auto& f : m.faces) {
      ply::write_le<std::uint8_t>(out, 3);
      for (int idx : f) ply::write_le<std::int32_t>(out, idx);
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void save_obj(const TriangleMesh& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  char buf[128];
  for (const Vec3& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  const bool normals = m.has_normals();
  if (normals) {
    for (const Vec3& n : m.vertex_normals) {
      std::snprintf(buf, sizeof buf, "vn %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
      out << buf;
    }
  }
  for (const auto& f : m.faces) {
    out << 'f';
    for (int idx : f) {
      out << ' ' << idx + 1;
      if (normals) out << "//" << idx + 1;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

double TriangleMesh::face_area(std::size_t f) const { return 0.5 * face_cross(*this, f).norm(); }

Vec3 TriangleMesh::face_normal(std::size_t f) const {
  const Vec3 c = face_cross(*this, f);
  const double len = c.norm();
  return len > 0.0 ? Vec3(c / len) : Vec3::Zero();
}

double TriangleMesh::total_area() const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) a += face_area(f);
  return a;
}

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  if (ext == ".ply") return MeshFormat::Ply;
  if (ext == ".obj") return MeshFormat::Obj;
  throw Error(ErrorCode::UnsupportedFormat, "unknown mesh extension '" + ext + "'");
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format, LoadReport* report) {
  LoadReport local;
  TriangleMesh m = format == MeshFormat::Ply ? load_ply(path, local) : load_obj(path, local);
  clean(m, local);
  if (report != nullptr) *report = local;
  return m;
}

TriangleMesh load_mesh(const std::filesystem::path& path, LoadReport* report) {
  return load_mesh(path, format_from_path(path), report);
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format,
               PlyEncoding encoding) {
  if (format == MeshFormat::Ply) {
    save_ply(mesh, path, encoding);
  } else {
    save_obj(mesh, path);
  }
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path) {
  save_mesh(mesh, path, format_from_path(path));
}

void validate(const TriangleMesh& mesh) {
  check_indices(mesh);
  if (mesh.has_normals()) {
    if (mesh.vertex_normals.size() != mesh.vertices.size()) {
      throw Error(ErrorCode::ParseError, "normal count does not match vertex count");
    }
    for (const Vec3& n : mesh.vertex_normals) {
      if (std::abs(n.norm() - 1.0) > 1e-6) throw Error(ErrorCode::ParseError, "non-unit normal");
    }
  }
}

TriangleMesh compute_vertex_normals(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "cannot compute normals without faces");
  TriangleMesh out = mesh;
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  // The unnormalized cross product is twice the area times the unit normal.
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3 c = face_cross(mesh, f);
    for (int idx : mesh.faces[f]) acc[std::size_t(idx)] += c;
  }
  std::vector<std::uint8_t> referenced(mesh.vertices.size(), 0);
  for (const auto& f : mesh.faces) {
    for (int idx : f) referenced[std::size_t(idx)] = 1;
  }
  out.vertex_normals.assign(mesh.vertices.size(), Vec3::UnitZ());
  for (std::size_t v = 0; v < acc.size(); ++v) {
    if (!referenced[v]) continue;  // isolated vertex: arbitrary but unit
    const double len = acc[v].norm();
    if (!(len > 0.0)) {
      throw Error(ErrorCode::DegenerateGeometry,
                  "vertex " + std::to_string(v) + " has only zero-area incident faces");
    }
    out.vertex_normals[v] = acc[v] / len;
  }
  return out;
}

TriangleCurvature triangle_curvature(const TriangleMesh& mesh) {
  if (!mesh.has_normals()) {
    throw Error(ErrorCode::InvalidArgument, "triangle_curvature needs vertex normals");
  }
  TriangleCurvature tc;
  const std::size_t nf = mesh.faces.size();
  tc.per_face.resize(nf);
  bool degenerate = false;
#pragma omp parallel for schedule(static) reduction(|| : degenerate) num_threads(num_threads())
  for (std::int64_t f = 0; f < std::int64_t(nf); ++f) {
    const auto& t = mesh.faces[std::size_t(f)];
    double sum = 0.0;
    for (int e = 0; e < 3; ++e) {
      const auto a = std::size_t(t[std::size_t(e)]);
      const auto b = std::size_t(t[std::size_t((e + 1) % 3)]);
      const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
      if (len < 1e-12) {
        degenerate = true;
        continue;
      }
      sum += ((mesh.vertex_normals[a] - mesh.vertex_normals[b]) / len).squaredNorm();
    }
    tc.per_face[std::size_t(f)] = sum * mesh.face_area(std::size_t(f));
  }
  if (degenerate) throw Error(ErrorCode::DegenerateGeometry, "edge shorter than 1e-12");
  tc.cumulative.resize(nf);
  double run = 0.0;
  for (std::size_t f = 0; f < nf; ++f) {
    run += tc.per_face[f];
    tc.cumulative[f] = run;
  }
  return tc;
}

}  // namespace gradsurf
