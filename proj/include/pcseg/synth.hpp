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

#include "pcseg/dataio.hpp"

// Synthetic scene generator: primitive objects (boxes, spheres, cylinders)
// inside a room shell, surface-sampled into a full cloud with exact GT masks,
// plus RGB-D frames rendered from a circular camera trajectory with per-frame
// 2D mask sets. Stands in for a real RGB-D dataset plus a 2D segmenter.

namespace pcseg::synth {

struct SynthSpec {
  std::uint64_t seed = 0;

  int object_count_min = 4;
  int object_count_max = 7;
  Vec3 room_extent_min{2.6, 2.6, 2.2};
  Vec3 room_extent_max{3.8, 3.8, 2.7};
  int points_per_object_min = 350;
  int points_per_object_max = 700;
  int shell_points = 2600;
  int frames_per_scene = 6;
  int masks_per_frame_target = 50;

  int image_width = 64;
  int image_height = 48;

  // imperfect-2D-mask simulation
  bool perturb = false;
  double erode_prob = 0.5;   // drop chance for mask boundary pixels
  double split_prob = 0.25;  // chance an object mask is cut in two

  void validate() const;
};

/// Deterministic in spec (same spec, byte-identical scene).
io::SceneRecord generate(const SynthSpec& spec, const std::string& scene_id);

/// Renders depth/color/per-pixel object id for one camera against labeled
/// points. Exposed for the z-buffer correctness tests.
struct Rendered {
  geom::DepthFrame frame;
  std::vector<int> pixel_object;  // -1 where no sample landed
};
Rendered render_view(const geom::PointCloud& cloud, const std::vector<int>& object_ids,
                     const geom::CameraIntrinsics& k, const geom::RigidPose& pose, int width,
                     int height);

}  // namespace pcseg::synth
