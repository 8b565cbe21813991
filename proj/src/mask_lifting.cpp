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

#include "pcseg/mask_lifting.hpp"

#include <algorithm>
#include <map>

namespace pcseg::lift {

std::vector<int> resolve_overlaps(const mask::MaskSet2D& ms) {
  ms.validate();
  const std::size_t n = static_cast<std::size_t>(ms.width) * ms.height;
  std::vector<int> labels(n, -1);
  std::vector<double> best(n, -1.0);

  // iterate in ascending id order so equal scores keep the lowest id
  std::vector<const mask::Mask2D*> ordered;
  for (const mask::Mask2D& m : ms.masks) ordered.push_back(&m);
  std::sort(ordered.begin(), ordered.end(),
            [](const mask::Mask2D* a, const mask::Mask2D* b) { return a->id < b->id; });
  for (const mask::Mask2D* m : ordered) {
    for (std::size_t i = 0; i < n; ++i) {
      if (m->raster[i] && m->score > best[i]) {
        best[i] = m->score;
        labels[i] = m->id;
      }
    }
  }
  return labels;
}

LiftResult lift_masks(const io::FrameBundle& bundle, const std::vector<int>& pixel_labels,
                      std::size_t min_points) {
  const std::size_t n_pix =
      static_cast<std::size_t>(bundle.frame.width) * bundle.frame.height;
  if (pixel_labels.size() != n_pix)
    throw ValidationError("lift: label map does not match frame dimensions");

  geom::FrameCloud fc = geom::unproject_frame(bundle.frame, bundle.intrinsics, bundle.pose);

  std::map<int, double> scores;
  for (const mask::Mask2D& m : bundle.masks2d.masks) scores[m.id] = m.score;

  std::map<int, std::vector<std::uint8_t>> memberships;
  for (std::size_t pix = 0; pix < n_pix; ++pix) {
    const std::int64_t point = fc.pixel_to_point[pix];
    if (point < 0 || pixel_labels[pix] < 0) continue;
    auto [it, inserted] = memberships.try_emplace(pixel_labels[pix]);
    if (inserted) it->second.assign(fc.cloud.size(), 0);
    it->second[static_cast<std::size_t>(point)] = 1;
  }

  LiftResult out;
  out.cloud = std::move(fc.cloud);
  out.pixel_to_point = std::move(fc.pixel_to_point);
  out.masks.point_count = out.cloud.size();
  for (auto& [id, membership] : memberships) {
    mask::Mask m;
    m.id = id;
    const auto sit = scores.find(id);
    if (sit != scores.end()) m.score = sit->second;
    m.membership = std::move(membership);
    out.masks.masks.push_back(std::move(m));
  }
  out.masks = out.masks.filtered(min_points);
  return out;
}

LiftResult lift_frame(const io::FrameBundle& bundle, std::size_t min_points) {
  return lift_masks(bundle, resolve_overlaps(bundle.masks2d), min_points);
}

}  // namespace pcseg::lift
