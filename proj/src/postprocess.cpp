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

#include "pcseg/postprocess.hpp"

#include <algorithm>
#include <numeric>

#include "pcseg/pseudo_labels.hpp"

namespace pcseg::post {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  /// Joins two roots; the edge weight becomes the component's max internal
  /// edge (edges arrive in ascending order).
  std::size_t unite(std::size_t a, std::size_t b, double w) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = w;
    return a;
  }
  std::size_t size(std::size_t root) const { return size_[root]; }
  double internal(std::size_t root) const { return internal_[root]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::vector<double> internal_;
};

}  // namespace

Oversegmentation felzenszwalb_segments(const geom::PointCloud& cloud,
                                       const FelzParams& params) {
  if (!(params.fz_k > 0)) throw ValidationError("felzenszwalb: fz_k must be > 0");
  const std::size_t n = cloud.size();
  Oversegmentation out;
  if (n == 0) return out;
  if (n == 1) {
    out.segment_of = {0};
    out.count = 1;
    return out;
  }

  struct WeightedEdge {
    double w;
    std::size_t a, b;
    bool operator<(const WeightedEdge& o) const {
      return w != o.w ? w < o.w : (a != o.a ? a < o.a : b < o.b);
    }
  };
  std::vector<WeightedEdge> edges;
  const std::size_t k = std::min(params.k_nn, n - 1);
  for (const geom::Edge& e : geom::knn_graph(cloud, k)) {
    double w;
    if (cloud.has_normals()) {
      w = 1.0 - cloud.normals[e.a].dot(cloud.normals[e.b]);
    } else {
      w = (cloud.colors[e.a] - cloud.colors[e.b]).norm();
    }
    edges.push_back({w, e.a, e.b});
  }
  std::sort(edges.begin(), edges.end());

  UnionFind uf(n);
  for (const WeightedEdge& e : edges) {
    const std::size_t ra = uf.find(e.a);
    const std::size_t rb = uf.find(e.b);
    if (ra == rb) continue;
    const double ta = uf.internal(ra) + params.fz_k / uf.size(ra);
    const double tb = uf.internal(rb) + params.fz_k / uf.size(rb);
    if (e.w <= std::min(ta, tb)) uf.unite(ra, rb, e.w);
  }
  // fold undersized segments into their lowest-weight neighbor
  if (params.min_segment > 1) {
    for (const WeightedEdge& e : edges) {
      const std::size_t ra = uf.find(e.a);
      const std::size_t rb = uf.find(e.b);
      if (ra == rb) continue;
      if (uf.size(ra) < params.min_segment || uf.size(rb) < params.min_segment)
        uf.unite(ra, rb, e.w);
    }
  }

  out.segment_of.resize(n);
  std::vector<std::int64_t> dense(n, -1);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (dense[root] < 0) dense[root] = static_cast<std::int64_t>(next++);
    out.segment_of[i] = static_cast<std::size_t>(dense[root]);
  }
  out.count = next;
  return out;
}

mask::MaskSet smooth_masks(const mask::MaskSet& masks, const Oversegmentation& seg) {
  if (seg.segment_of.size() != masks.point_count)
    throw ValidationError("smooth_masks: segmentation does not match mask point count");

  // votes[segment][mask index]; unlabeled points vote for "none"
  std::vector<std::vector<std::size_t>> votes(seg.count,
                                              std::vector<std::size_t>(masks.masks.size(), 0));
  std::vector<std::size_t> covered(seg.count, 0);
  std::vector<std::size_t> seg_size(seg.count, 0);
  for (std::size_t i = 0; i < masks.point_count; ++i) {
    const std::size_t s = seg.segment_of[i];
    ++seg_size[s];
    bool any = false;
    for (std::size_t m = 0; m < masks.masks.size(); ++m) {
      if (masks.masks[m].membership[i]) {
        ++votes[s][m];
        any = true;
      }
    }
    if (any) ++covered[s];
  }

  mask::MaskSet out;
  out.point_count = masks.point_count;
  std::vector<std::int64_t> winner(seg.count, -1);
  for (std::size_t s = 0; s < seg.count; ++s) {
    std::size_t best = 0;
    std::int64_t best_m = -1;
    for (std::size_t m = 0; m < masks.masks.size(); ++m) {
      // strict > keeps the lowest mask id on ties (masks are ordered by id)
      if (votes[s][m] > best) {
        best = votes[s][m];
        best_m = static_cast<std::int64_t>(m);
      }
    }
    const std::size_t none_votes = seg_size[s] - covered[s];
    if (best_m >= 0 && best >= none_votes) winner[s] = best_m;
  }

  std::vector<mask::Mask> rebuilt(masks.masks.size());
  for (std::size_t m = 0; m < masks.masks.size(); ++m) {
    rebuilt[m].id = masks.masks[m].id;
    rebuilt[m].score = masks.masks[m].score;
    rebuilt[m].structural = masks.masks[m].structural;
    rebuilt[m].membership.assign(masks.point_count, 0);
  }
  for (std::size_t i = 0; i < masks.point_count; ++i) {
    const std::int64_t w = winner[seg.segment_of[i]];
    if (w >= 0) rebuilt[static_cast<std::size_t>(w)].membership[i] = 1;
  }
  for (mask::Mask& m : rebuilt)
    if (m.member_count() > 0) out.masks.push_back(std::move(m));
  return out;
}

mask::MaskSet split_components(const mask::MaskSet& masks, const geom::PointCloud& cloud,
                               double eps, std::size_t min_pts, std::size_t min_mask_points) {
  return pseudo::split_instances(masks, cloud, eps, min_pts, min_mask_points);
}

mask::MaskSet postprocess(const mask::MaskSet& masks, const geom::PointCloud& cloud,
                          const PostprocessParams& params) {
  const Oversegmentation seg = felzenszwalb_segments(cloud, params.felz);
  const mask::MaskSet smoothed = smooth_masks(masks, seg);
  return split_components(smoothed, cloud, params.dbscan_eps, params.dbscan_min_pts,
                          params.min_mask_points);
}

}  // namespace pcseg::post
