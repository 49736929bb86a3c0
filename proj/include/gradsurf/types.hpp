#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace gradsurf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct Index3 {
  int i = 0, j = 0, k = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

struct Dims3 {
  int nx = 0, ny = 0, nz = 0;

  std::int64_t count() const { return std::int64_t(nx) * ny * nz; }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz;
  }
  // k-fastest linear order.
  std::int64_t linear(int i, int j, int k) const {
    return (std::int64_t(i) * ny + j) * nz + k;
  }
  Index3 unlinear(std::int64_t idx) const {
    const int k = int(idx % nz);
    const std::int64_t ij = idx / nz;
    return {int(ij / ny), int(ij % ny), k};
  }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

}  // namespace gradsurf
