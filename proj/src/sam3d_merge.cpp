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

#include "pcseg/sam3d_merge.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pcseg::sam3d {

namespace {

using Cell = std::array<std::int64_t, 3>;

Cell cell_of(const Vec3& p, double size) {
  return {static_cast<std::int64_t>(std::floor(p.x / size)),
          static_cast<std::int64_t>(std::floor(p.y / size)),
          static_cast<std::int64_t>(std::floor(p.z / size))};
}

/// Fraction of `from` member points with a `to` member within radius.
double directed_overlap(const geom::PointCloud& from_cloud, const mask::Mask& from_mask,
                        const geom::PointCloud& to_cloud, const mask::Mask& to_mask,
                        double radius) {
  std::map<Cell, std::vector<Vec3>> grid;
  for (std::size_t i = 0; i < to_mask.membership.size(); ++i)
    if (to_mask.membership[i])
      grid[cell_of(to_cloud.positions[i], radius)].push_back(to_cloud.positions[i]);
  if (grid.empty()) return 0.0;

  const double r2 = radius * radius;
  std::size_t members = 0, hits = 0;
  for (std::size_t i = 0; i < from_mask.membership.size(); ++i) {
    if (!from_mask.membership[i]) continue;
    ++members;
    const Vec3& p = from_cloud.positions[i];
    const Cell c = cell_of(p, radius);
    bool hit = false;
    for (std::int64_t dx = -1; dx <= 1 && !hit; ++dx)
      for (std::int64_t dy = -1; dy <= 1 && !hit; ++dy)
        for (std::int64_t dz = -1; dz <= 1 && !hit; ++dz) {
          const auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == grid.end()) continue;
          for (const Vec3& q : it->second) {
            if ((p - q).norm2() <= r2) {
              hit = true;
              break;
            }
          }
        }
    hits += hit;
  }
  return members == 0 ? 0.0 : static_cast<double>(hits) / members;
}

}  // namespace

double overlap_score(const geom::PointCloud& cloud_a, const mask::Mask& mask_a,
                     const geom::PointCloud& cloud_b, const mask::Mask& mask_b, double radius) {
  if (!(radius > 0)) throw ValidationError("overlap_score: radius must be > 0");
  return std::max(directed_overlap(cloud_a, mask_a, cloud_b, mask_b, radius),
                  directed_overlap(cloud_b, mask_b, cloud_a, mask_a, radius));
}

PartialSegmentation merge_pair(const PartialSegmentation& a, const PartialSegmentation& b,
                               const MergeParams& params) {
  if (!(params.theta_merge > 0) || params.theta_merge > 1)
    throw ValidationError("merge: theta_merge must be in (0,1]");

  PartialSegmentation out;
  out.cloud.positions = a.cloud.positions;
  out.cloud.colors = a.cloud.colors;
  out.cloud.positions.insert(out.cloud.positions.end(), b.cloud.positions.begin(),
                             b.cloud.positions.end());
  out.cloud.colors.insert(out.cloud.colors.end(), b.cloud.colors.begin(),
                          b.cloud.colors.end());
  out.source_frames = a.source_frames;
  out.source_frames.insert(out.source_frames.end(), b.source_frames.begin(),
                           b.source_frames.end());

  struct Candidate {
    double score;
    std::size_t ai, bi;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < a.masks.masks.size(); ++i) {
    for (std::size_t j = 0; j < b.masks.masks.size(); ++j) {
      const double s = overlap_score(a.cloud, a.masks.masks[i], b.cloud, b.masks.masks[j],
                                     params.radius);
      if (s >= params.theta_merge) candidates.push_back({s, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.ai != y.ai) return x.ai < y.ai;
    return x.bi < y.bi;
  });
  std::vector<std::int64_t> partner_of_a(a.masks.masks.size(), -1);
  std::vector<std::uint8_t> b_taken(b.masks.masks.size(), 0);
  for (const Candidate& c : candidates) {
    if (partner_of_a[c.ai] >= 0 || b_taken[c.bi]) continue;
    partner_of_a[c.ai] = static_cast<std::int64_t>(c.bi);
    b_taken[c.bi] = 1;
  }

  const std::size_t offset = a.cloud.size();
  const std::size_t total = out.cloud.size();
  out.masks.point_count = total;
  int next_id = 0;
  const auto extended = [&](const mask::Mask& m, bool from_b) {
    std::vector<std::uint8_t> membership(total, 0);
    for (std::size_t i = 0; i < m.membership.size(); ++i)
      if (m.membership[i]) membership[from_b ? offset + i : i] = 1;
    return membership;
  };
  for (std::size_t i = 0; i < a.masks.masks.size(); ++i) {
    mask::Mask merged;
    merged.id = next_id++;
    merged.membership = extended(a.masks.masks[i], false);
    merged.score = a.masks.masks[i].score;
    if (partner_of_a[i] >= 0) {
      const mask::Mask& bm = b.masks.masks[static_cast<std::size_t>(partner_of_a[i])];
      for (std::size_t k = 0; k < bm.membership.size(); ++k)
        if (bm.membership[k]) merged.membership[offset + k] = 1;
      if (bm.score)
        merged.score = merged.score ? std::max(*merged.score, *bm.score) : *bm.score;
    }
    out.masks.masks.push_back(std::move(merged));
  }
  for (std::size_t j = 0; j < b.masks.masks.size(); ++j) {
    if (b_taken[j]) continue;
    mask::Mask pass;
    pass.id = next_id++;
    pass.score = b.masks.masks[j].score;
    pass.membership = extended(b.masks.masks[j], true);
    out.masks.masks.push_back(std::move(pass));
  }
  return out;
}

PartialSegmentation merge_sequence(std::vector<PartialSegmentation> frames,
                                   const MergeParams& params) {
  if (frames.empty()) throw ValidationError("merge_sequence: need at least one frame");
  while (frames.size() > 1) {
    std::vector<PartialSegmentation> next;
    for (std::size_t i = 0; i + 1 < frames.size(); i += 2)
      next.push_back(merge_pair(frames[i], frames[i + 1], params));
    if (frames.size() % 2 == 1) next.push_back(std::move(frames.back()));
    frames = std::move(next);
  }
  return std::move(frames.front());
}

}  // namespace pcseg::sam3d
