#include "gradsurf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "gradsurf/error.hpp"

namespace gradsurf {

namespace {

// Uniform in [0, 1) from the top 53 bits; stable across standard libraries.
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, n) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

void require_normals(const TriangleMesh& mesh) {
  if (mesh.faces.empty() && mesh.vertices.empty()) {
    throw Error(ErrorCode::EmptyMesh, "cannot sample an empty mesh");
  }
  if (!mesh.has_normals()) throw Error(ErrorCode::InvalidArgument, "sampling needs vertex normals");
}

std::vector<double> area_cumulative(const TriangleMesh& mesh) {
  std::vector<double> cum(mesh.faces.size());
  double run = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    run += mesh.face_area(f);
    cum[f] = run;
  }
  return cum;
}

// Draws one oriented sample: face by weight, then (r1, r2) inside it.
class WeightedFaceSampler {
 public:
  WeightedFaceSampler(const TriangleMesh& mesh, std::vector<double> cumulative, std::uint64_t seed)
      : mesh_(mesh), cum_(std::move(cumulative)), rng_(seed) {}

  std::pair<Vec3, Vec3> next() {
    const double u = uniform01(rng_) * cum_.back();
    const std::size_t f = select_by_cumulative(cum_, u);
    const double r1 = uniform01(rng_);
    const double r2 = uniform01(rng_);
    return point_in_face(mesh_, f, r1, r2);
  }

 private:
  const TriangleMesh& mesh_;
  std::vector<double> cum_;
  std::mt19937_64 rng_;
};

OrientedPointCloud sample_weighted(const TriangleMesh& mesh, std::vector<double> cumulative,
                                   std::size_t count, std::uint64_t seed) {
  WeightedFaceSampler sampler(mesh, std::move(cumulative), seed);
  OrientedPointCloud cloud;
  cloud.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto [p, n] = sampler.next();
    cloud.push_back(p, n);
  }
  return cloud;
}

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = std::uint64_t(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= std::uint64_t(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= std::uint64_t(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return std::size_t(h);
  }
};

}  // namespace

std::pair<Vec3, Vec3> point_in_face(const TriangleMesh& mesh, std::size_t f, double r1,
                                    double r2) {
  const auto& t = mesh.faces[f];
  const double s = std::sqrt(r1);
  const double wa = 1.0 - s;
  const double wb = s * (1.0 - r2);
  const double wc = s * r2;
  const auto a = std::size_t(t[0]), b = std::size_t(t[1]), c = std::size_t(t[2]);
  const Vec3 p = wa * mesh.vertices[a] + wb * mesh.vertices[b] + wc * mesh.vertices[c];
  Vec3 n = wa * mesh.vertex_normals[a] + wb * mesh.vertex_normals[b] + wc * mesh.vertex_normals[c];
  const double len = n.norm();
  n = len > 1e-12 ? Vec3(n / len) : mesh.face_normal(f);
  return {p, n};
}

std::size_t select_by_cumulative(std::span<const double> cumulative, double u) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) {
    it = std::lower_bound(cumulative.begin(), cumulative.end(), cumulative.back());
  }
  return std::size_t(it - cumulative.begin());
}

OrientedPointCloud sample_vertices(const TriangleMesh& mesh, std::size_t count,
                                   std::uint64_t seed) {
  if (mesh.vertices.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no vertices");
  require_normals(mesh);
  std::mt19937_64 rng(seed);
  const std::size_t nv = mesh.vertices.size();
  OrientedPointCloud cloud;
  cloud.reserve(count);
  if (count <= nv) {
    std::vector<std::size_t> idx(nv);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + std::size_t(bounded(rng, nv - i));
      std::swap(idx[i], idx[j]);
      cloud.push_back(mesh.vertices[idx[i]], mesh.vertex_normals[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = std::size_t(bounded(rng, nv));
      cloud.push_back(mesh.vertices[v], mesh.vertex_normals[v]);
    }
  }
  return cloud;
}

OrientedPointCloud sample_area(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  require_normals(mesh);
  return sample_weighted(mesh, area_cumulative(mesh), count, seed);
}

OrientedPointCloud sample_curvature(const TriangleMesh& mesh, std::size_t count,
                                    std::uint64_t seed) {
  if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  require_normals(mesh);
  TriangleCurvature curv = triangle_curvature(mesh);
  if (!(curv.total() > 0.0)) {
    throw Error(ErrorCode::ZeroCurvature, "every face is flat; use area sampling instead");
  }
  return sample_weighted(mesh, std::move(curv.cumulative), count, seed);
}

PoissonDiskResult sample_poisson_disk(const TriangleMesh& mesh, std::size_t count, double radius,
                                      std::uint64_t seed) {
  if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  require_normals(mesh);
  if (radius < 0.0 || !std::isfinite(radius)) {
    throw Error(ErrorCode::InvalidArgument, "disk radius must be finite and >= 0");
  }
  WeightedFaceSampler sampler(mesh, area_cumulative(mesh), seed);
  PoissonDiskResult result;
  result.cloud.reserve(count);
  const std::size_t budget = 30 * count;
  const double r2 = radius * radius;
  std::unordered_map<CellKey, std::vector<std::int32_t>, CellHash> cells;
  auto key_of = [&](const Vec3& p) {
    return CellKey{std::int64_t(std::floor(p.x() / radius)), std::int64_t(std::floor(p.y() / radius)),
                   std::int64_t(std::floor(p.z() / radius))};
  };

  while (result.cloud.size() < count && result.candidates < budget) {
    auto [p, n] = sampler.next();
    ++result.candidates;
    if (radius == 0.0) {
      result.cloud.push_back(p, n);
      continue;
    }
    const CellKey key = key_of(p);
    bool ok = true;
    for (std::int64_t dx = -1; dx <= 1 && ok; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && ok; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && ok; ++dz) {
          auto it = cells.find({key.x + dx, key.y + dy, key.z + dz});
          if (it == cells.end()) continue;
          for (std::int32_t q : it->second) {
            if ((result.cloud.points[std::size_t(q)] - p).squaredNorm() < r2) {
              ok = false;
              break;
            }
          }
        }
      }
    }
    if (!ok) continue;
    cells[key].push_back(std::int32_t(result.cloud.size()));
    result.cloud.push_back(p, n);
  }
  result.radius_too_large = 2 * result.cloud.size() < count;
  return result;
}

double default_disk_radius(const TriangleMesh& mesh, std::size_t count) {
  return std::sqrt(mesh.total_area() / (2.0 * double(std::max<std::size_t>(count, 1))));
}

OrientedPointCloud sample(const TriangleMesh& mesh, const SamplerConfig& config) {
  if (config.count < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be >= 1");
  switch (config.strategy) {
    case SamplingStrategy::Vertex: return sample_vertices(mesh, config.count, config.seed);
    case SamplingStrategy::Area: return sample_area(mesh, config.count, config.seed);
    case SamplingStrategy::Curvature: return sample_curvature(mesh, config.count, config.seed);
    case SamplingStrategy::PoissonDisk: {
      const double radius =
          config.disk_radius > 0.0 ? config.disk_radius : default_disk_radius(mesh, config.count);
      PoissonDiskResult r = sample_poisson_disk(mesh, config.count, radius, config.seed);
      if (r.radius_too_large) {
        spdlog::warn("poisson disk: radius {} too large, accepted {} of {} after {} candidates",
                     radius, r.cloud.size(), config.count, r.candidates);
      }
      return std::move(r.cloud);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown sampling strategy");
}

SamplingStrategy parse_strategy(std::string_view name) {
  if (name == "vertex") return SamplingStrategy::Vertex;
  if (name == "area") return SamplingStrategy::Area;
  if (name == "poisson" || name == "poisson_disk") return SamplingStrategy::PoissonDisk;
  if (name == "curvature") return SamplingStrategy::Curvature;
  throw Error(ErrorCode::InvalidArgument, "unknown sampling strategy '" + std::string(name) + "'");
}

}  // namespace gradsurf
