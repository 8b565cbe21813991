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

#include "pcseg/pseudo_labels.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include "pcseg/kernels.hpp"
#include "pcseg/training.hpp"

namespace pcseg::pseudo {

double mask_confidence(const double* heatmap_row, std::size_t n) {
  std::vector<double> sig(n);
  kernels::sigmoid(heatmap_row, sig.data(), n);
  double total = 0;
  std::size_t members = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sig[i] > 0.5) {
      total += sig[i];
      ++members;
    }
  }
  return members == 0 ? 0.0 : total / members;
}

double obj_confidence(double object_logit, double no_object_logit) {
  return train::object_probability(object_logit, no_object_logit);
}

std::vector<ScoredMask> score_prediction(const net::Prediction& pred) {
  const std::size_t q = pred.heatmaps.rows();
  const std::size_t n = pred.heatmaps.cols();
  std::vector<ScoredMask> out(q);
  for (std::size_t i = 0; i < q; ++i) {
    const double* h = pred.heatmaps.data.data() + i * n;
    out[i].membership = net::binarize(h, n);
    out[i].c_mask = mask_confidence(h, n);
    out[i].c_obj = obj_confidence(pred.objectness.at(i, 0), pred.objectness.at(i, 1));
    out[i].c = out[i].c_mask * out[i].c_obj;
  }
  return out;
}

mask::MaskSet select_masks(const net::Prediction& pred, double tau_c) {
  if (tau_c < 0 || tau_c > 1) throw ValidationError("select_masks: tau_c must be in [0,1]");
  mask::MaskSet out;
  out.point_count = pred.heatmaps.cols();
  int next_id = 0;
  for (ScoredMask& sm : score_prediction(pred)) {
    const bool empty =
        std::none_of(sm.membership.begin(), sm.membership.end(), [](std::uint8_t b) { return b; });
    if (empty || !(sm.c > tau_c)) continue;
    mask::Mask m;
    m.id = next_id++;
    m.score = sm.c;
    m.membership = std::move(sm.membership);
    out.masks.push_back(std::move(m));
  }
  return out;
}

std::vector<int> dbscan_labels(const std::vector<Vec3>& points, double eps,
                               std::size_t min_pts) {
  if (!(eps > 0)) throw ValidationError("dbscan: eps must be > 0");
  if (min_pts < 1) throw ValidationError("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();

  // cell hash at eps so a radius query only inspects the 27 surrounding cells
  std::map<std::array<std::int64_t, 3>, std::vector<std::size_t>> grid;
  const auto cell_of = [&](const Vec3& p) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x / eps)),
                                       static_cast<std::int64_t>(std::floor(p.y / eps)),
                                       static_cast<std::int64_t>(std::floor(p.z / eps))};
  };
  for (std::size_t i = 0; i < n; ++i) grid[cell_of(points[i])].push_back(i);

  const double eps2 = eps * eps;
  const auto region_query = [&](std::size_t i) {
    std::vector<std::size_t> hits;
    const auto c = cell_of(points[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second)
            if ((points[i] - points[j]).norm2() <= eps2) hits.push_back(j);
        }
    std::sort(hits.begin(), hits.end());
    return hits;
  };

  std::vector<int> labels(n, -1);
  std::vector<std::uint8_t> visited(n, 0);
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    const std::vector<std::size_t> seeds0 = region_query(i);
    if (seeds0.size() < min_pts) continue;  // noise unless claimed later
    labels[i] = cluster;
    std::deque<std::size_t> seeds(seeds0.begin(), seeds0.end());
    while (!seeds.empty()) {
      const std::size_t j = seeds.front();
      seeds.pop_front();
      if (!visited[j]) {
        visited[j] = 1;
        const std::vector<std::size_t> nj = region_query(j);
        if (nj.size() >= min_pts) seeds.insert(seeds.end(), nj.begin(), nj.end());
      }
      if (labels[j] == -1) labels[j] = cluster;
    }
    ++cluster;
  }
  return labels;
}

mask::MaskSet split_instances(const mask::MaskSet& ms, const geom::PointCloud& cloud,
                              double eps, std::size_t min_pts, std::size_t min_mask_points) {
  if (ms.point_count != cloud.size())
    throw ValidationError("split_instances: mask set does not match cloud size");
  mask::MaskSet out;
  out.point_count = ms.point_count;
  int next_id = 0;
  for (const mask::Mask& m : ms.masks) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < m.membership.size(); ++i)
      if (m.membership[i]) members.push_back(i);
    std::vector<Vec3> positions;
    positions.reserve(members.size());
    for (std::size_t i : members) positions.push_back(cloud.positions[i]);

    const std::vector<int> labels = dbscan_labels(positions, eps, min_pts);
    const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    for (int c = 0; c < clusters; ++c) {
      mask::Mask part;
      part.score = m.score;
      part.structural = m.structural;
      part.membership.assign(ms.point_count, 0);
      std::size_t count = 0;
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (labels[k] == c) {
          part.membership[members[k]] = 1;
          ++count;
        }
      }
      if (count >= min_mask_points) {
        part.id = next_id++;
        out.masks.push_back(std::move(part));
      }
    }
  }
  return out;
}

}  // namespace pcseg::pseudo
