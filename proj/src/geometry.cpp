// Copyright 2026 The pcseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pcseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcseg/kernels.hpp"

namespace pcseg::geom {

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0))
    throw ValidationError("intrinsics: focal lengths must be positive");
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy))
    throw ValidationError("intrinsics: non-finite entries");
}

void RigidPose::validate(double tol) const {
  const Mat3 rtr = rotation.transposed() * rotation;
  const Mat3 eye = Mat3::identity();
  for (int i = 0; i < 9; ++i)
    if (std::abs(rtr.m[i] - eye.m[i]) > tol)
      throw ValidationError("pose: rotation is not orthonormal");
  if (std::abs(rotation.det() - 1.0) > tol)
    throw ValidationError("pose: rotation determinant is not +1");
}

Vec3 RigidPose::camera_center() const {
  return rotation.transposed() * translation * -1.0;
}

void DepthFrame::validate() const {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (depth.size() != n || color.size() != n)
    throw ValidationError("frame: depth/color dimensions disagree");
  for (double d : depth)
    if (!(d >= 0)) throw ValidationError("frame: negative or non-finite depth");
}

void PointCloud::validate() const {
  if (colors.size() != positions.size())
    throw ValidationError("cloud: positions and colors differ in length");
  if (!normals.empty()) {
    if (normals.size() != positions.size())
      throw ValidationError("cloud: normals length mismatch");
    for (const Vec3& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-6)
        throw ValidationError("cloud: normals are not unit length");
  }
}

std::vector<double> PointCloud::packed_positions() const {
  std::vector<double> out(positions.size() * 3);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out[3 * i] = positions[i].x;
    out[3 * i + 1] = positions[i].y;
    out[3 * i + 2] = positions[i].z;
  }
  return out;
}

VoxelGrid::Cell VoxelGrid::cell_of(const Vec3& p, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(p.x / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.y / voxel_size)),
          static_cast<std::int64_t>(std::floor(p.z / voxel_size))};
}

VoxelGrid build_voxel_grid(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0)) throw ValidationError("voxel grid: voxel_size must be > 0");
  VoxelGrid grid;
  grid.voxel_size = voxel_size;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    grid.cells[VoxelGrid::cell_of(cloud.positions[i], voxel_size)].push_back(i);
  return grid;
}

Vec3 unproject_pixel(const CameraIntrinsics& K, const RigidPose& pose, const PixelCoord& p,
                     double depth) {
  if (!(depth > 0)) throw ValidationError("unproject: depth must be positive");
  const Vec3 cam{depth * (p.u - K.cx) / K.fx, depth * (p.v - K.cy) / K.fy, depth};
  const Mat3 rt = pose.rotation.transposed();
  return rt * cam - rt * pose.translation;
}

Projection project_point(const CameraIntrinsics& K, const RigidPose& pose, const Vec3& point) {
  const Vec3 cam = pose.rotation * point + pose.translation;
  if (!(cam.z > 0)) throw ValidationError("project: point is behind the camera");
  return {{K.fx * cam.x / cam.z + K.cx, K.fy * cam.y / cam.z + K.cy}, cam.z};
}

FrameCloud unproject_frame(const DepthFrame& frame, const CameraIntrinsics& K,
                           const RigidPose& pose) {
  FrameCloud out;
  out.pixel_to_point.assign(static_cast<std::size_t>(frame.width) * frame.height, -1);
  const Mat3 rt = pose.rotation.transposed();
  const Vec3 center = rt * pose.translation * -1.0;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const std::size_t pix = static_cast<std::size_t>(v) * frame.width + u;
      const double d = frame.depth[pix];
      if (!(d > 0)) continue;
      const Vec3 cam{d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d};
      out.pixel_to_point[pix] = static_cast<std::int64_t>(out.cloud.size());
      out.cloud.positions.push_back(rt * cam + center);
      out.cloud.colors.push_back(frame.color[pix]);
    }
  }
  return out;
}

DownsampleResult voxel_downsample(const PointCloud& cloud, double voxel_size) {
  const VoxelGrid grid = build_voxel_grid(cloud, voxel_size);
  DownsampleResult out;
  out.point_to_voxel.resize(cloud.size());
  out.cloud.positions.reserve(grid.cells.size());
  out.cloud.colors.reserve(grid.cells.size());
  std::size_t voxel_index = 0;
  for (const auto& [cell, members] : grid.cells) {
    Vec3 pos{0, 0, 0}, col{0, 0, 0};
    for (std::size_t idx : members) {
      pos += cloud.positions[idx];
      col += cloud.colors[idx];
      out.point_to_voxel[idx] = voxel_index;
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    out.cloud.positions.push_back(pos * inv);
    out.cloud.colors.push_back(col * inv);
    ++voxel_index;
  }
  return out;
}

std::vector<std::size_t> fps_sample(const PointCloud& cloud, std::size_t k, std::uint64_t seed) {
  if (cloud.size() == 0 || k == 0 || k > cloud.size())
    throw ValidationError("fps: need 1 <= k <= N");
  Rng rng(seed);
  return fps_sample_from(cloud, k, rng.uniform_int(cloud.size()));
}

std::vector<std::size_t> fps_sample_from(const PointCloud& cloud, std::size_t k,
                                         std::size_t first_index) {
  const std::size_t n = cloud.size();
  if (n == 0 || k == 0 || k > n) throw ValidationError("fps: need 1 <= k <= N");
  if (first_index >= n) throw ValidationError("fps: first index out of range");

  const std::vector<double> packed = cloud.packed_positions();
  std::vector<std::size_t> picked;
  picked.reserve(k);
  picked.push_back(first_index);

  std::vector<std::uint8_t> selected(n, 0);
  selected[first_index] = 1;
  std::vector<double> min_d(n), row(n);
  {
    const double q[3] = {cloud.positions[first_index].x, cloud.positions[first_index].y,
                         cloud.positions[first_index].z};
    kernels::sqdist(q, packed.data(), n, min_d.data());
  }
  while (picked.size() < k) {
    std::size_t best = n;
    double best_d = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (!selected[i] && min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    picked.push_back(best);
    selected[best] = 1;
    const double q[3] = {cloud.positions[best].x, cloud.positions[best].y,
                         cloud.positions[best].z};
    kernels::sqdist(q, packed.data(), n, row.data());
    kernels::min_inplace(min_d.data(), row.data(), n);
  }
  return picked;
}

std::vector<double> fourier_encode(const Vec3& p, int bands, const Aabb& bounds,
                                   std::uint64_t* clamped_count) {
  if (bands < 1) throw ValidationError("fourier: bands must be >= 1");
  const Vec3 ext = bounds.extent();
  if (!(ext.x > 0) || !(ext.y > 0) || !(ext.z > 0))
    throw ValidationError("fourier: degenerate scene bounds");

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(6) * bands);
  for (int axis = 0; axis < 3; ++axis) {
    double x = (p[axis] - bounds.min[axis]) / ext[axis];
    if (x < 0 || x > 1) {
      if (clamped_count) ++*clamped_count;
      x = std::clamp(x, 0.0, 1.0);
    }
    for (int b = 0; b < bands; ++b) {
      const double arg = std::ldexp(1.0, b) * M_PI * x;
      out.push_back(std::sin(arg));
      out.push_back(std::cos(arg));
    }
  }
  return out;
}

std::vector<Edge> knn_graph(const PointCloud& cloud, std::size_t k) {
  const std::size_t n = cloud.size();
  if (k >= n) throw ValidationError("knn: need k < N");

  const std::vector<double> packed = cloud.packed_positions();
  std::vector<double> row(n);
  std::vector<std::size_t> order(n);

  // Collect directed picks as (min,max) pairs; symmetric closure = dedupe.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double q[3] = {cloud.positions[i].x, cloud.positions[i].y, cloud.positions[i].z};
    kernels::sqdist(q, packed.data(), n, row.data());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto cmp = [&](std::size_t a, std::size_t b) {
      return row[a] != row[b] ? row[a] < row[b] : a < b;
    };
    // k+1 smallest; the query point itself sorts first (distance 0, lowest tie index).
    std::nth_element(order.begin(), order.begin() + k, order.end(), cmp);
    std::sort(order.begin(), order.begin() + k + 1, cmp);
    std::size_t taken = 0;
    for (std::size_t j = 0; j <= k && taken < k; ++j) {
      if (order[j] == i) continue;
      pairs.emplace_back(std::min(i, order[j]), std::max(i, order[j]));
      ++taken;
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs)
    edges.push_back({a, b, (cloud.positions[a] - cloud.positions[b]).norm()});
  return edges;
}

SymEigen3 sym_eigen3(const Mat3& input) {
  // Cyclic Jacobi; plenty for 3x3.
  Mat3 a = input;
  Mat3 v = Mat3::identity();
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    if (off < 1e-15 * (std::abs(a(0, 0)) + std::abs(a(1, 1)) + std::abs(a(2, 2)) + 1e-300))
      break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double s = t * c;
        Mat3 rot = Mat3::identity();
        rot(p, p) = c; rot(q, q) = c; rot(p, q) = s; rot(q, p) = -s;
        a = rot.transposed() * a * rot;
        v = v * rot;
      }
    }
  }
  std::array<int, 3> idx = {0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  SymEigen3 out;
  for (int r = 0; r < 3; ++r) {
    out.values[r] = a(idx[r], idx[r]);
    out.vectors[r] = {v(0, idx[r]), v(1, idx[r]), v(2, idx[r])};
  }
  return out;
}

namespace {

Vec3 fix_normal_sign(Vec3 n) {
  constexpr double kTie = 1e-9;
  double key = n.z;
  if (std::abs(key) <= kTie) key = n.y;
  if (std::abs(key) <= kTie) key = n.x;
  if (key < 0) n = n * -1.0;
  return n;
}

}  // namespace

NormalsResult estimate_normals(const PointCloud& cloud, std::size_t k) {
  const std::size_t n = cloud.size();
  if (k < 3) throw ValidationError("normals: need k >= 3");
  if (k >= n) throw ValidationError("normals: need k < N");

  const std::vector<double> packed = cloud.packed_positions();
  std::vector<double> row(n);
  std::vector<std::size_t> order(n);

  NormalsResult out;
  out.normals.resize(n);
  out.degenerate.assign(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const double q[3] = {cloud.positions[i].x, cloud.positions[i].y, cloud.positions[i].z};
    kernels::sqdist(q, packed.data(), n, row.data());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto cmp = [&](std::size_t a, std::size_t b) {
      return row[a] != row[b] ? row[a] < row[b] : a < b;
    };
    std::nth_element(order.begin(), order.begin() + k, order.end(), cmp);
    std::sort(order.begin(), order.begin() + k + 1, cmp);

    // Neighborhood: the point itself plus its k nearest neighbors.
    Vec3 mean{0, 0, 0};
    for (std::size_t j = 0; j <= k; ++j) mean += cloud.positions[order[j]];
    mean = mean / static_cast<double>(k + 1);
    Mat3 cov;
    for (std::size_t j = 0; j <= k; ++j) {
      const Vec3 d = cloud.positions[order[j]] - mean;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov(r, c) += d[r] * d[c];
    }
    const SymEigen3 eig = sym_eigen3(cov);
    const double scale = std::max({std::abs(eig.values[0]), std::abs(eig.values[1]),
                                   std::abs(eig.values[2]), 1e-300});
    if (eig.values[1] <= 1e-9 * scale) {
      // rank < 2: no plane is defined
      out.normals[i] = {0, 0, 1};
      out.degenerate[i] = 1;
      ++out.degenerate_count;
      continue;
    }
    Vec3 normal = eig.vectors[0];
    normal = normal / normal.norm();
    out.normals[i] = fix_normal_sign(normal);
  }
  return out;
}

}  // namespace pcseg::geom
