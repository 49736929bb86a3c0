#include "gradsurf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Dense>

#include "gradsurf/error.hpp"
#include "gradsurf/kdtree.hpp"
#include "gradsurf/parallel.hpp"
#include "gradsurf/raycast.hpp"
#include "gradsurf/sampling.hpp"
#include "ply.hpp"

namespace gradsurf {

namespace {

// Area-uniform surface points; meshes here need not carry normals.
std::vector<Vec3> surface_samples(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  std::vector<double> cum(mesh.faces.size());
  double run = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    run += mesh.face_area(f);
    cum[f] = run;
  }
  if (!(run > 0.0)) throw Error(ErrorCode::EmptyMesh, "mesh has zero surface area");
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return double(rng() >> 11) * 0x1.0p-53; };
  std::vector<Vec3> pts;
  pts.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t f = select_by_cumulative(cum, uniform() * run);
    const double r1 = std::sqrt(uniform());
    const double r2 = uniform();
    const auto& t = mesh.faces[f];
    pts.push_back((1.0 - r1) * mesh.vertices[std::size_t(t[0])] + r1 * (1.0 - r2) * mesh.vertices[std::size_t(t[1])] +
                  r1 * r2 * mesh.vertices[std::size_t(t[2])]);
  }
  return pts;
}

struct PixelRay {
  Vec3 origin;
  Vec3 dir;  // camera-frame z component is 1, so hit t equals depth
};

class RayGenerator {
 public:
  explicit RayGenerator(const CameraView& view)
      : kinv_(view.intrinsics.inverse()),
        rot_(view.pose.topLeftCorner<3, 3>()),
        center_(view.pose.topRightCorner<3, 1>()) {}

  PixelRay operator()(int x, int y) const {
    Vec3 d = kinv_ * Vec3(x + 0.5, y + 0.5, 1.0);
    d /= d.z();
    return {center_, rot_ * d};
  }

 private:
  Mat3 kinv_;
  Mat3 rot_;
  Vec3 center_;
};

template <class HitFn>
DepthImage render(const CameraView& view, HitFn&& hit, bool parallel) {
  view.validate();
  DepthImage img(view.width, view.height);
  const RayGenerator rays(view);
#pragma omp parallel for schedule(dynamic, 4) num_threads(num_threads()) if (parallel)
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      const PixelRay ray = rays(x, y);
      if (const auto h = hit(ray.origin, ray.dir)) img.at(x, y) = h->t;
    }
  }
  return img;
}

void check_heatmap_inputs(const TriangleMesh& source, const TriangleMesh& target, int k) {
  if (source.vertices.empty() || target.vertices.empty()) {
    throw Error(ErrorCode::EmptyMesh, "heat map needs vertices on both meshes");
  }
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (target.vertices.size() < std::size_t(k)) {
    throw Error(ErrorCode::InvalidArgument, "target has fewer than k vertices");
  }
}

}  // namespace

void CameraView::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  const Mat3& k = intrinsics;
  if (k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0 || !(k(0, 0) > 0.0) || !(k(1, 1) > 0.0) ||
      !(k(2, 2) > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "intrinsics must be upper triangular with positive focal lengths");
  }
  const Mat3 r = pose.topLeftCorner<3, 3>();
  if (!(r.transpose() * r).isApprox(Mat3::Identity(), 1e-6) ||
      ((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "pose rotation is not orthonormal");
  }
}

double fscore(double precision, double recall) {
  return precision > 0.0 && recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double fraction_within(std::span<const Vec3> from, std::span<const Vec3> to, double threshold) {
  if (from.empty()) return 0.0;
  const KdTree tree(to);
  const double t2 = threshold * threshold;
  std::int64_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits) num_threads(num_threads())
  for (std::int64_t i = 0; i < std::int64_t(from.size()); ++i) {
    if (tree.nearest(from[std::size_t(i)]).dist2 <= t2) ++hits;
  }
  return double(hits) / double(from.size());
}

MetricsReport3D eval_3d(const TriangleMesh& pred, const TriangleMesh& gt, double threshold,
                        std::size_t samples_per_mesh, std::uint64_t seed) {
  if (pred.empty() || gt.empty()) throw Error(ErrorCode::EmptyMesh, "eval_3d needs two non-empty meshes");
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be > 0");
  if (samples_per_mesh < 1) throw Error(ErrorCode::InvalidArgument, "need at least one sample");
  // Same seed for both meshes so that swapping the arguments swaps precision and recall.
  const auto pred_pts = surface_samples(pred, samples_per_mesh, seed);
  const auto gt_pts = surface_samples(gt, samples_per_mesh, seed);
  MetricsReport3D r;
  r.threshold = threshold;
  r.precision = fraction_within(pred_pts, gt_pts, threshold);
  r.recall = fraction_within(gt_pts, pred_pts, threshold);
  r.fscore = fscore(r.precision, r.recall);
  return r;
}

DepthImage render_depth(const TriangleMesh& mesh, const CameraView& view) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "nothing to render");
  const Bvh bvh(mesh);
  return render(view, [&](const Vec3& o, const Vec3& d) { return bvh.closest_hit(o, d); }, true);
}

DepthImage render_depth_brute_force(const TriangleMesh& mesh, const CameraView& view) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "nothing to render");
  return render(view, [&](const Vec3& o, const Vec3& d) { return closest_hit_brute_force(mesh, o, d); }, false);
}

MetricsReport2D eval_2d(const DepthImage& pred, const DepthImage& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw Error(ErrorCode::InvalidArgument, "depth images differ in size");
  }
  MetricsReport2D r;
  double abs_rel = 0.0, abs_diff = 0.0, sq_rel = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double d = pred.values[i], g = gt.values[i];
    if (!(d > 0.0) || !(g > 0.0) || !std::isfinite(d) || !std::isfinite(g)) continue;
    const double e = d - g;
    abs_rel += std::abs(e) / g;
    abs_diff += std::abs(e);
    sq_rel += e * e / g;
    sq += e * e;
    ++r.valid_pixels;
  }
  if (r.valid_pixels == 0) throw Error(ErrorCode::NoValidPixels, "no pixel is valid in both images");
  const double n = double(r.valid_pixels);
  r.abs_rel = abs_rel / n;
  r.abs_diff = abs_diff / n;
  r.sq_rel = sq_rel / n;
  r.rmse = std::sqrt(sq / n);
  return r;
}

std::vector<double> error_heatmap(const TriangleMesh& source, const TriangleMesh& target, int k) {
  check_heatmap_inputs(source, target, k);
  const KdTree tree(target.vertices);
  std::vector<double> out(source.vertices.size());
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (std::int64_t i = 0; i < std::int64_t(out.size()); ++i) {
    double s = 0.0;
    for (const auto& nb : tree.knn(source.vertices[std::size_t(i)], std::size_t(k))) s += std::sqrt(nb.dist2);
    out[std::size_t(i)] = s;
  }
  return out;
}

std::vector<double> error_heatmap_brute_force(const TriangleMesh& source, const TriangleMesh& target, int k) {
  check_heatmap_inputs(source, target, k);
  std::vector<double> out(source.vertices.size());
  std::vector<KdTree::Neighbor> all(target.vertices.size());
  for (std::size_t i = 0; i < source.vertices.size(); ++i) {
    for (std::size_t j = 0; j < target.vertices.size(); ++j) {
      all[j] = {(target.vertices[j] - source.vertices[i]).squaredNorm(), std::int32_t(j)};
    }
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    double s = 0.0;
    for (int m = 0; m < k; ++m) s += std::sqrt(all[std::size_t(m)].dist2);
    out[i] = s;
  }
  return out;
}

std::vector<std::array<std::uint8_t, 3>> heat_colors(std::span<const double> values) {
  std::vector<std::array<std::uint8_t, 3>> colors(values.size(), {0, 0, 255});
  if (values.empty()) return colors;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank 95th percentile.
  const auto rank = std::size_t(std::ceil(0.95 * double(sorted.size())));
  const double top = sorted[std::max<std::size_t>(rank, 1) - 1];
  if (!(top > 0.0)) return colors;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = std::clamp(values[i] / top, 0.0, 1.0);
    colors[i] = {std::uint8_t(std::lround(255.0 * t)), 0, std::uint8_t(std::lround(255.0 * (1.0 - t)))};
  }
  return colors;
}

void save_heatmap_ply(const TriangleMesh& mesh, std::span<const double> values,
                      const std::filesystem::path& path) {
  if (values.size() != mesh.vertices.size()) {
    throw Error(ErrorCode::InvalidArgument, "one value per vertex expected");
  }
  const auto colors = heat_colors(values);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property double error\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int a = 0; a < 3; ++a) ply::write_le(out, mesh.vertices[i][a]);
    for (std::uint8_t c : colors[i]) ply::write_le(out, c);
    ply::write_le(out, values[i]);
  }
  for (const auto& f : mesh.faces) {
    ply::write_le<std::uint8_t>(out, 3);
    for (int idx : f) ply::write_le<std::int32_t>(out, idx);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace gradsurf
