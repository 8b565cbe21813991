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

#include "pcseg/masks.hpp"
#include "pcseg/network.hpp"

// Confidence scoring of predicted masks and the DBSCAN instance splitter.
// c_mask = mean sigmoid(h) over member points, c_obj = softmax object
// probability, c = c_mask * c_obj; masks with c above a threshold become
// the supervision for the fine-tuning stage.

namespace pcseg::pseudo {

struct ScoredMask {
  std::vector<std::uint8_t> membership;  // sigmoid(h) > 0.5
  double c_mask = 0;
  double c_obj = 0;
  double c = 0;
};

/// Mean of sigmoid(h_i) over {i : sigmoid(h_i) > 0.5}; 0 when no point
/// clears the threshold.
double mask_confidence(const double* heatmap_row, std::size_t n);

/// Softmax probability of the object class from (object, no-object) logits.
double obj_confidence(double object_logit, double no_object_logit);

/// Scores every query of a prediction.
std::vector<ScoredMask> score_prediction(const net::Prediction& pred);

/// Keeps non-empty masks with c strictly above tau_c. Output masks carry
/// score = c and dense ids in query order.
mask::MaskSet select_masks(const net::Prediction& pred, double tau_c);

/// Textbook DBSCAN labels: -1 noise, clusters numbered in order of their
/// first core point. The eps test is d <= eps; region queries include the
/// point itself.
std::vector<int> dbscan_labels(const std::vector<Vec3>& points, double eps,
                               std::size_t min_pts);

/// Splits each mask into its DBSCAN clusters over member positions; noise
/// points are dropped, clusters smaller than min_mask_points are dropped,
/// scores are inherited, ids are reassigned densely.
mask::MaskSet split_instances(const mask::MaskSet& ms, const geom::PointCloud& cloud,
                              double eps, std::size_t min_pts, std::size_t min_mask_points);

}  // namespace pcseg::pseudo
