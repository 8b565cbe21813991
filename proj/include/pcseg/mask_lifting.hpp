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

// Turns per-frame 2D mask sets into per-point masks on the frame's partial
// cloud: overlaps resolve to the highest-score mask, every valid-depth point
// inherits its pixel's label, and tiny masks are dropped.

namespace pcseg::lift {

/// Per-pixel winning mask id (-1 where uncovered). Highest score wins;
/// equal scores resolve to the lowest mask id.
std::vector<int> resolve_overlaps(const mask::MaskSet2D& ms);

struct LiftResult {
  geom::PointCloud cloud;                  // the frame's partial cloud
  mask::MaskSet masks;                     // per-point masks, scores carried from 2D
  std::vector<std::int64_t> pixel_to_point;
};

/// Unprojects the frame and lifts a pixel label map onto its points.
LiftResult lift_masks(const io::FrameBundle& bundle, const std::vector<int>& pixel_labels,
                      std::size_t min_points);

/// resolve_overlaps + lift_masks.
LiftResult lift_frame(const io::FrameBundle& bundle, std::size_t min_points);

}  // namespace pcseg::lift
