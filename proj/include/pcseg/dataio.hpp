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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcseg/geometry.hpp"
#include "pcseg/masks.hpp"

// On-disk formats (documented byte-exactly in docs/formats.md):
//   depth  - 16-bit big-endian binary PGM (P5, maxval 65535), millimeters, 0 invalid
//   color  - binary PPM (P6, maxval 255)
//   clouds - PLY, binary little-endian by default, ascii accepted; optional
//            int mask_id per vertex; multi-mask sets in a JSON sidecar
//   K/pose - plain text 3x3 / 3x4 row-major matrices, '#' comments allowed
//   masks  - one JSON document per frame/cloud with RLE-coded rasters

namespace pcseg::io {

namespace fs = std::filesystem;

/// Stamp written into every output artifact.
struct Provenance {
  std::string config_hash = "unconfigured";
  std::string version = kVersion;
};

struct FrameBundle {
  std::string frame_id;
  geom::DepthFrame frame;
  geom::CameraIntrinsics intrinsics;
  geom::RigidPose pose;
  mask::MaskSet2D masks2d;

  void validate() const;
};

struct SceneRecord {
  std::string scene_id;
  geom::PointCloud full_cloud;
  mask::MaskSet gt_masks;  // empty set when unknown
  std::vector<FrameBundle> frames;
};

// -- rasters ------------------------------------------------------------------

void save_depth_pgm(const fs::path& path, const geom::DepthFrame& frame,
                    const Provenance& prov = {});
/// Loads depth (meters) into an existing frame, setting width/height.
void load_depth_pgm(const fs::path& path, geom::DepthFrame& frame);

void save_color_ppm(const fs::path& path, const geom::DepthFrame& frame,
                    const Provenance& prov = {});
void load_color_ppm(const fs::path& path, geom::DepthFrame& frame);

// -- matrices -----------------------------------------------------------------

void save_intrinsics(const fs::path& path, const geom::CameraIntrinsics& k,
                     const Provenance& prov = {});
geom::CameraIntrinsics load_intrinsics(const fs::path& path);

void save_pose(const fs::path& path, const geom::RigidPose& pose, const Provenance& prov = {});
geom::RigidPose load_pose(const fs::path& path);

// -- clouds ---------------------------------------------------------------------

struct PlyOptions {
  bool binary = true;
  Provenance prov;
};

/// Saves positions/colors (+normals when present) and, when labels are given,
/// an int mask_id property (-1 = unlabeled).
void save_cloud(const fs::path& path, const geom::PointCloud& cloud,
                const std::vector<int>* labels = nullptr, const PlyOptions& opts = {});

struct LoadedCloud {
  geom::PointCloud cloud;
  std::vector<int> labels;  // empty when the file has no mask_id property
};
LoadedCloud load_cloud(const fs::path& path);

// -- mask sets ------------------------------------------------------------------

void save_masks2d(const fs::path& path, const mask::MaskSet2D& ms, const Provenance& prov = {});
mask::MaskSet2D load_masks2d(const fs::path& path);

void save_masks(const fs::path& path, const mask::MaskSet& ms, const Provenance& prov = {});
mask::MaskSet load_masks(const fs::path& path);

// -- frame bundles ----------------------------------------------------------------
// A bundle `prefix` expands to prefix.depth.pgm / .color.ppm / .intrinsics.txt
// / .pose.txt / .masks.json.

void save_frame_bundle(const fs::path& prefix, const FrameBundle& bundle,
                       const Provenance& prov = {});
FrameBundle load_frame_bundle(const fs::path& prefix);

// -- scenes -----------------------------------------------------------------------
// scene_dir/scene.json + full_cloud.ply + full_cloud.masks.json + frames/.

void save_scene(const fs::path& scene_dir, const SceneRecord& scene,
                const Provenance& prov = {});
SceneRecord load_scene(const fs::path& scene_dir);
/// Scene directories under a root, sorted by name.
std::vector<fs::path> list_scenes(const fs::path& root);

}  // namespace pcseg::io
