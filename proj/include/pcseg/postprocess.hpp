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

// Prediction post-processing: graph-based oversegmentation smoothing
// followed by DBSCAN component splitting.

namespace pcseg::post {

struct Oversegmentation {
  std::vector<std::size_t> segment_of;  // per point, dense ids
  std::size_t count = 0;
};

struct FelzParams {
  std::size_t k_nn = 10;
  double fz_k = 0.02;
  std::size_t min_segment = 20;
};

/// Graph-based greedy union over a kNN graph. Edge weight is 1 - n_i.n_j
/// when normals are present, RGB distance otherwise; components C1, C2 join
/// over an edge w iff w <= min(Int(C) + fz_k/|C|) for both; a final pass
/// folds segments smaller than min_segment into their lowest-weight
/// neighbor.
Oversegmentation felzenszwalb_segments(const geom::PointCloud& cloud, const FelzParams& params);

/// Assigns every segment wholly to the mask holding the plurality of its
/// points (ties to the lowest mask id); segments whose unlabeled count beats
/// the best mask stay unassigned. Output masks are unions of whole segments.
mask::MaskSet smooth_masks(const mask::MaskSet& masks, const Oversegmentation& seg);

/// DBSCAN component split applied to every mask (same semantics as the
/// pseudo-label splitter).
mask::MaskSet split_components(const mask::MaskSet& masks, const geom::PointCloud& cloud,
                               double eps, std::size_t min_pts, std::size_t min_mask_points);

struct PostprocessParams {
  FelzParams felz;
  double dbscan_eps = 0.05;
  std::size_t dbscan_min_pts = 10;
  std::size_t min_mask_points = 10;
};

/// smooth -> split, the order used for every "with post-processing" report.
mask::MaskSet postprocess(const mask::MaskSet& masks, const geom::PointCloud& cloud,
                          const PostprocessParams& params);

}  // namespace pcseg::post
