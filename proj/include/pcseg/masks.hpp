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

#include <cstdint>
#include <optional>
#include <vector>

#include "pcseg/common.hpp"

namespace pcseg::mask {

/// Run-length encoding of a binary vector: alternating run lengths starting
/// with a zero-run (possibly of length 0). The sum of runs equals the vector
/// length. This is the on-disk form for every raster and membership vector.
std::vector<std::uint64_t> rle_encode(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> rle_decode(const std::vector<std::uint64_t>& runs,
                                     std::size_t expected_size);

/// One 2D mask: a binary raster over width*height pixels (row-major) plus
/// the segmenter's predicted-IoU style score.
struct Mask2D {
  int id = 0;
  double score = 1.0;
  std::vector<std::uint8_t> raster;

  std::size_t pixel_count() const;
};

struct MaskSet2D {
  int width = 0, height = 0;
  std::vector<Mask2D> masks;

  void validate() const;
};

/// One 3D mask: binary membership over a cloud's N points.
struct Mask {
  int id = 0;
  std::optional<double> score;
  bool structural = false;  // room-shell masks (floor/walls/ceiling) in GT
  std::vector<std::uint8_t> membership;

  std::size_t member_count() const;
};

struct MaskSet {
  std::size_t point_count = 0;
  std::vector<Mask> masks;

  void validate() const;
  /// Drops masks with fewer than min_points members.
  MaskSet filtered(std::size_t min_points) const;
  /// Resolved single-label view: per point, the id of the covering mask with
  /// the highest score (ties to lowest id), or -1.
  std::vector<int> to_labels() const;
};

/// Builds a MaskSet from per-point integer labels (-1 = unlabeled).
MaskSet from_labels(const std::vector<int>& labels);

}  // namespace pcseg::mask
