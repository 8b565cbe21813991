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

#include "pcseg/geometry.hpp"
#include "pcseg/masks.hpp"

// Baseline that merges per-frame 3D masks bottom-up into a scene
// segmentation. Frames merge pairwise per round (halving) until one
// segmentation remains; two masks merge when their bidirectional spatial
// overlap clears a threshold, greedily by descending overlap, one-to-one.

namespace pcseg::sam3d {

struct PartialSegmentation {
  geom::PointCloud cloud;
  mask::MaskSet masks;
  std::vector<std::string> source_frames;
};

/// Fraction of one mask's points with a counterpart within `radius` on the
/// other mask, taken in both directions; returns the larger fraction.
double overlap_score(const geom::PointCloud& cloud_a, const mask::Mask& mask_a,
                     const geom::PointCloud& cloud_b, const mask::Mask& mask_b, double radius);

struct MergeParams {
  double theta_merge = 0.3;  // overlap fraction required to union two masks
  double radius = 0.04;      // meters; default 2x the working voxel size
};

/// Concatenates the clouds (a then b) and unions masks greedily by
/// descending overlap score; unmatched masks pass through. Ids are
/// reassigned densely.
PartialSegmentation merge_pair(const PartialSegmentation& a, const PartialSegmentation& b,
                               const MergeParams& params);

/// Pairwise-halving rounds until a single segmentation remains.
PartialSegmentation merge_sequence(std::vector<PartialSegmentation> frames,
                                   const MergeParams& params);

}  // namespace pcseg::sam3d
