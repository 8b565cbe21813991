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

#include <optional>

#include "pcseg/masks.hpp"

// Class-agnostic average precision.
//
// Protocol: predictions sorted by descending score (ties: scene then id),
// each greedily matched to the highest-IoU unmatched ground-truth mask of
// its scene with IoU >= threshold; AP is the area under the all-point
// interpolated PR curve (precision envelope). Detections are pooled across
// scenes into one curve. Size buckets restrict the ground truth to
// (0,2000], (2000,15000] and (15000,inf) points, drop structural
// (floor/wall/ceiling) masks, and ignore rather than penalize predictions
// that match an excluded mask or whose own size falls outside the bucket.

namespace pcseg::eval {

/// |A∩B| / |A∪B|; both empty -> 0 by definition.
double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

struct ScenePair {
  mask::MaskSet preds;  // scores required
  mask::MaskSet gts;
};

/// Single-scene AP at one IoU threshold (no bucket restriction).
double average_precision(const mask::MaskSet& preds, const mask::MaskSet& gts,
                         double iou_threshold);

struct BucketScores {
  double ap50 = 0;
  double ap25 = 0;
};

struct EvalReport {
  double ap = 0;    // mean over IoU 0.50:0.05:0.95
  double ap50 = 0;
  double ap25 = 0;
  BucketScores small;   // (0, 2000] points
  BucketScores medium;  // (2000, 15000]
  BucketScores large;   // (15000, inf)
  std::size_t pred_count = 0;
  std::size_t gt_count = 0;
};

/// Pooled evaluation over any number of scenes.
EvalReport evaluate_scenes(const std::vector<ScenePair>& scenes);

/// Single-scene convenience wrapper. Throws when pred/gt point counts
/// disagree.
EvalReport evaluate(const mask::MaskSet& preds, const mask::MaskSet& gts);

std::string report_json(const EvalReport& report);

}  // namespace pcseg::eval
