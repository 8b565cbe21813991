#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pcseg/mask_lifting.hpp"
#include "pcseg/sam3d_merge.hpp"
#include "pcseg/synth.hpp"
#include "support/test_utils.hpp"

using namespace pcseg;
using namespace pcseg::sam3d;

namespace {

PartialSegmentation grid_segment(double x0, std::size_t n, int mask_id) {
  PartialSegmentation seg;
  for (std::size_t i = 0; i < n; ++i) {
    seg.cloud.positions.push_back({x0 + 0.01 * i, 0, 0});
    seg.cloud.colors.push_back({0.5, 0.5, 0.5});
  }
  mask::Mask m;
  m.id = mask_id;
  m.membership.assign(n, 1);
  seg.masks.point_count = n;
  seg.masks.masks.push_back(std::move(m));
  return seg;
}

}  // namespace

TEST_CASE("overlap_score: identical, disjoint, and brute-force fractions") {
  const PartialSegmentation a = grid_segment(0.0, 20, 0);
  CHECK(overlap_score(a.cloud, a.masks.masks[0], a.cloud, a.masks.masks[0], 0.02) == 1.0);

  const PartialSegmentation far = grid_segment(10.0, 20, 0);
  CHECK(overlap_score(a.cloud, a.masks.masks[0], far.cloud, far.masks.masks[0], 0.02) == 0.0);

  // random half-overlapping sets vs an O(n^2) oracle
  Rng rng(17);
  for (int it = 0; it < 10; ++it) {
    geom::PointCloud ca = testutil::random_cloud(rng, 60, 0.2);
    geom::PointCloud cb = testutil::random_cloud(rng, 50, 0.2);
    mask::Mask ma, mb;
    ma.membership.assign(60, 0);
    mb.membership.assign(50, 0);
    for (int i = 0; i < 60; ++i) ma.membership[i] = rng.uniform01() < 0.6;
    for (int i = 0; i < 50; ++i) mb.membership[i] = rng.uniform01() < 0.6;
    const double radius = 0.07;

    const auto directed = [&](const geom::PointCloud& f, const mask::Mask& fm,
                              const geom::PointCloud& t, const mask::Mask& tm) {
      std::size_t members = 0, hits = 0;
      for (std::size_t i = 0; i < fm.membership.size(); ++i) {
        if (!fm.membership[i]) continue;
        ++members;
        for (std::size_t j = 0; j < tm.membership.size(); ++j) {
          if (tm.membership[j] &&
              (f.positions[i] - t.positions[j]).norm2() <= radius * radius) {
            ++hits;
            break;
          }
        }
      }
      return members == 0 ? 0.0 : double(hits) / members;
    };
    const double expect = std::max(directed(ca, ma, cb, mb), directed(cb, mb, ca, ma));
    CHECK(overlap_score(ca, ma, cb, mb, radius) == expect);
  }
}

TEST_CASE("merge_pair: disjoint passthrough, self-merge, point conservation") {
  const PartialSegmentation a = grid_segment(0.0, 15, 0);
  const PartialSegmentation b = grid_segment(5.0, 10, 0);
  MergeParams params;
  params.theta_merge = 0.3;
  params.radius = 0.02;

  const PartialSegmentation disjoint = merge_pair(a, b, params);
  CHECK(disjoint.cloud.size() == 25);
  CHECK(disjoint.masks.masks.size() == 2);

  const PartialSegmentation self = merge_pair(a, a, params);
  CHECK(self.cloud.size() == 30);
  CHECK(self.masks.masks.size() == 1);  // same mask twice merges to one
  CHECK(self.masks.masks[0].member_count() == 30);

  // membership never shrinks
  std::size_t before = a.masks.masks[0].member_count() + b.masks.masks[0].member_count();
  std::size_t after = 0;
  for (const mask::Mask& m : disjoint.masks.masks) after += m.member_count();
  CHECK(after == before);
}

TEST_CASE("merge_sequence: identity, idempotence, determinism") {
  const PartialSegmentation a = grid_segment(0.0, 12, 0);
  MergeParams params;
  params.theta_merge = 0.3;
  params.radius = 0.02;

  const PartialSegmentation one = merge_sequence({a}, params);
  CHECK(one.cloud.size() == a.cloud.size());
  CHECK(one.masks.masks.size() == 1);

  const PartialSegmentation four = merge_sequence({a, a, a, a}, params);
  CHECK(four.cloud.size() == 4 * a.cloud.size());
  CHECK(four.masks.masks.size() == 1);

  const PartialSegmentation again = merge_sequence({a, a, a, a}, params);
  CHECK(four.masks.masks[0].membership == again.masks.masks[0].membership);
}

TEST_CASE("two views of one synthetic object merge into one mask") {
  synth::SynthSpec spec;
  spec.seed = 5;
  spec.object_count_min = 1;
  spec.object_count_max = 1;
  spec.points_per_object_min = 300;
  spec.points_per_object_max = 300;
  spec.shell_points = 600;
  spec.frames_per_scene = 2;
  spec.image_width = 48;
  spec.image_height = 36;
  const io::SceneRecord scene = synth::generate(spec, "s");

  std::vector<PartialSegmentation> frames;
  for (const io::FrameBundle& bundle : scene.frames) {
    const lift::LiftResult lifted = lift::lift_frame(bundle, 10);
    PartialSegmentation seg;
    seg.cloud = lifted.cloud;
    seg.masks = lifted.masks;
    seg.source_frames = {bundle.frame_id};
    frames.push_back(std::move(seg));
  }
  MergeParams params;
  params.theta_merge = 0.3;
  params.radius = 0.1;
  const PartialSegmentation merged = merge_sequence(frames, params);

  CHECK(merged.cloud.size() == frames[0].cloud.size() + frames[1].cloud.size());
  // object id 0 was lifted in both frames; after the merge a single mask
  // should span points from both halves of the concatenated cloud
  const std::size_t offset = frames[0].cloud.size();
  bool found_spanning = false;
  for (const mask::Mask& m : merged.masks.masks) {
    bool in_a = false, in_b = false;
    for (std::size_t i = 0; i < m.membership.size(); ++i) {
      if (!m.membership[i]) continue;
      (i < offset ? in_a : in_b) = true;
    }
    found_spanning = found_spanning || (in_a && in_b);
  }
  CHECK(found_spanning);
}
