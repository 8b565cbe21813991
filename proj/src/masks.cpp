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

#include "pcseg/masks.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace pcseg::mask {

std::vector<std::uint64_t> rle_encode(const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint64_t> runs;
  std::uint8_t current = 0;  // runs start with zeros
  std::uint64_t length = 0;
  for (std::uint8_t b : bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v == current) {
      ++length;
    } else {
      runs.push_back(length);
      current = v;
      length = 1;
    }
  }
  runs.push_back(length);
  return runs;
}

std::vector<std::uint8_t> rle_decode(const std::vector<std::uint64_t>& runs,
                                     std::size_t expected_size) {
  std::vector<std::uint8_t> bits;
  bits.reserve(expected_size);
  std::uint8_t current = 0;
  for (std::uint64_t run : runs) {
    bits.insert(bits.end(), run, current);
    current = current ? 0 : 1;
  }
  if (bits.size() != expected_size)
    throw ValidationError("rle: decoded length " + std::to_string(bits.size()) +
                          " does not match expected " + std::to_string(expected_size));
  return bits;
}

std::size_t Mask2D::pixel_count() const {
  return static_cast<std::size_t>(std::count(raster.begin(), raster.end(), std::uint8_t{1}));
}

void MaskSet2D::validate() const {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::set<int> ids;
  for (const Mask2D& m : masks) {
    if (m.raster.size() != n)
      throw ValidationError("mask2d: raster size mismatch for mask " + std::to_string(m.id));
    if (!(m.score >= 0 && m.score <= 1))
      throw ValidationError("mask2d: score outside [0,1] for mask " + std::to_string(m.id));
    if (!ids.insert(m.id).second)
      throw ValidationError("mask2d: duplicate mask id " + std::to_string(m.id));
  }
}

std::size_t Mask::member_count() const {
  return static_cast<std::size_t>(
      std::count(membership.begin(), membership.end(), std::uint8_t{1}));
}

void MaskSet::validate() const {
  std::set<int> ids;
  for (const Mask& m : masks) {
    if (m.membership.size() != point_count)
      throw ValidationError("mask: membership length mismatch for mask " + std::to_string(m.id));
    if (m.member_count() == 0)
      throw ValidationError("mask: empty mask " + std::to_string(m.id));
    if (!ids.insert(m.id).second)
      throw ValidationError("mask: duplicate mask id " + std::to_string(m.id));
  }
}

MaskSet MaskSet::filtered(std::size_t min_points) const {
  if (min_points < 1) throw ValidationError("filter: min_points must be >= 1");
  MaskSet out;
  out.point_count = point_count;
  for (const Mask& m : masks)
    if (m.member_count() >= min_points) out.masks.push_back(m);
  return out;
}

std::vector<int> MaskSet::to_labels() const {
  std::vector<int> labels(point_count, -1);
  std::vector<double> best(point_count, -1.0);
  // Iterate masks sorted by id so equal-score overlaps resolve to lowest id.
  std::vector<const Mask*> ordered;
  ordered.reserve(masks.size());
  for (const Mask& m : masks) ordered.push_back(&m);
  std::sort(ordered.begin(), ordered.end(),
            [](const Mask* a, const Mask* b) { return a->id < b->id; });
  for (const Mask* m : ordered) {
    const double s = m->score.value_or(1.0);
    for (std::size_t i = 0; i < point_count; ++i) {
      if (m->membership[i] && s > best[i]) {
        best[i] = s;
        labels[i] = m->id;
      }
    }
  }
  return labels;
}

MaskSet from_labels(const std::vector<int>& labels) {
  std::map<int, std::vector<std::uint8_t>> grouped;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    auto [it, inserted] = grouped.try_emplace(labels[i]);
    if (inserted) it->second.assign(labels.size(), 0);
    it->second[i] = 1;
  }
  MaskSet out;
  out.point_count = labels.size();
  for (auto& [id, membership] : grouped) {
    Mask m;
    m.id = id;
    m.membership = std::move(membership);
    out.masks.push_back(std::move(m));
  }
  return out;
}

}  // namespace pcseg::mask
