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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pcseg/common.hpp"

namespace pcseg::geom {

/// Pinhole intrinsics. Pixel (u,v) maps to camera ray ((u-cx)/fx, (v-cy)/fy, 1).
struct CameraIntrinsics {
  double fx = 1, fy = 1, cx = 0, cy = 0;

  void validate() const;
};

/// World-to-camera rigid transform: x_cam = R * x_world + t.
struct RigidPose {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{0, 0, 0};

  /// Checks R^T R = I and det(R) = +1 within tol.
  void validate(double tol = 1e-9) const;
  /// Camera center in world coordinates, -R^T t.
  Vec3 camera_center() const;
};

/// Depth + color raster. Depth in meters, 0 marks an invalid pixel.
struct DepthFrame {
  int width = 0, height = 0;
  std::vector<double> depth;  // row-major, width*height
  std::vector<Vec3> color;    // RGB in [0,1]

  double depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;  // empty when absent

  std::size_t size() const { return positions.size(); }
  bool has_normals() const { return !normals.empty(); }
  void validate() const;
  Aabb bounds() const { return bounds_of(positions); }
  /// Positions as a packed n x 3 row-major array (for the distance kernels).
  std::vector<double> packed_positions() const;
};

struct VoxelGrid {
  using Cell = std::array<std::int64_t, 3>;
  double voxel_size = 0;
  // Ordered map so iteration (and thus every derived output) is deterministic.
  std::map<Cell, std::vector<std::size_t>> cells;

  static Cell cell_of(const Vec3& p, double voxel_size);
};

VoxelGrid build_voxel_grid(const PointCloud& cloud, double voxel_size);

struct PixelCoord {
  double u = 0, v = 0;
};

/// Eq.-of-motion for a single pixel: P = R^T (d K^{-1} p~) - R^T t.
/// Throws ValidationError when d <= 0.
Vec3 unproject_pixel(const CameraIntrinsics& K, const RigidPose& pose, const PixelCoord& p,
                     double depth);

struct Projection {
  PixelCoord pixel;
  double depth = 0;  // camera-frame z
};

/// Algebraic inverse of unproject_pixel. Throws ValidationError when the
/// point lies at or behind the camera plane (camera-frame z <= 0).
Projection project_point(const CameraIntrinsics& K, const RigidPose& pose, const Vec3& point);

struct FrameCloud {
  PointCloud cloud;
  /// width*height entries; index of the produced point or -1 for invalid depth.
  std::vector<std::int64_t> pixel_to_point;
};

/// Unprojects every valid-depth pixel, carrying its RGB.
FrameCloud unproject_frame(const DepthFrame& frame, const CameraIntrinsics& K,
                           const RigidPose& pose);

struct DownsampleResult {
  PointCloud cloud;
  /// original point index -> output voxel point index (total map)
  std::vector<std::size_t> point_to_voxel;
};

/// One output point per occupied voxel at the member centroid (mean position
/// and color). Output voxels are ordered by lexicographic cell coordinate.
DownsampleResult voxel_downsample(const PointCloud& cloud, double voxel_size);

/// Greedy farthest point sampling. The first index is a seeded uniform draw;
/// each following pick maximizes the min distance to the chosen set, ties
/// broken by lowest index.
std::vector<std::size_t> fps_sample(const PointCloud& cloud, std::size_t k, std::uint64_t seed);

/// FPS with an explicit first index (reproducibility hook; also what
/// fps_sample calls after drawing the start).
std::vector<std::size_t> fps_sample_from(const PointCloud& cloud, std::size_t k,
                                         std::size_t first_index);

/// Sin/cos features at frequencies 2^b * pi over positions normalized into
/// [0,1]^3 by `bounds`. Output length 6*bands, laid out per axis then per
/// band as [sin, cos]. Out-of-bounds coordinates are clamped;
/// *clamped_count, when given, is incremented per clamped coordinate.
std::vector<double> fourier_encode(const Vec3& p, int bands, const Aabb& bounds,
                                   std::uint64_t* clamped_count = nullptr);

struct Edge {
  std::size_t a = 0, b = 0;  // a < b
  double length = 0;
};

/// Undirected k-nearest-neighbor graph with symmetric closure and no
/// self-edges. Neighbor ties at equal distance resolve to the lower index.
std::vector<Edge> knn_graph(const PointCloud& cloud, std::size_t k);

struct NormalsResult {
  std::vector<Vec3> normals;
  std::vector<std::uint8_t> degenerate;  // 1 where the neighborhood had rank < 2
  std::size_t degenerate_count = 0;
};

/// PCA normals over each point's k-neighborhood (the point plus its k nearest
/// neighbors). Sign is fixed so z >= 0, with y then x breaking near-zero ties.
NormalsResult estimate_normals(const PointCloud& cloud, std::size_t k);

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues ascending with matching unit eigenvectors.
struct SymEigen3 {
  std::array<double, 3> values;
  std::array<Vec3, 3> vectors;
};
SymEigen3 sym_eigen3(const Mat3& m);

}  // namespace pcseg::geom
