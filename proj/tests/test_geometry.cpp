#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pcseg/geometry.hpp"
#include "support/test_utils.hpp"

using namespace pcseg;
using namespace pcseg::geom;
using testutil::random_cloud;
using testutil::random_rotation;

TEST_CASE("unproject_pixel identity cases") {
  CameraIntrinsics K;  // fx=fy=1, cx=cy=0
  RigidPose pose;

  Vec3 p = unproject_pixel(K, pose, {0, 0}, 2.0);
  CHECK(p.x == doctest::Approx(0));
  CHECK(p.y == doctest::Approx(0));
  CHECK(p.z == doctest::Approx(2));

  pose.translation = {1, 2, 3};
  p = unproject_pixel(K, pose, {0, 0}, 1.0);
  CHECK(p.x == doctest::Approx(-1));
  CHECK(p.y == doctest::Approx(-2));
  CHECK(p.z == doctest::Approx(-2));

  CHECK_THROWS_AS(unproject_pixel(K, pose, {0, 0}, 0.0), ValidationError);
  CHECK_THROWS_AS(unproject_pixel(K, pose, {0, 0}, -1.0), ValidationError);
}

TEST_CASE("project_point identity and behind-camera error") {
  CameraIntrinsics K;
  RigidPose pose;
  const Projection pr = project_point(K, pose, {0, 0, 2});
  CHECK(pr.pixel.u == doctest::Approx(0));
  CHECK(pr.pixel.v == doctest::Approx(0));
  CHECK(pr.depth == doctest::Approx(2));
  CHECK_THROWS_AS(project_point(K, pose, {0, 0, -1}), ValidationError);
  CHECK_THROWS_AS(project_point(K, pose, {0, 0, 0}), ValidationError);
}

TEST_CASE("unproject/project round-trip fuzz") {
  Rng rng(101);
  double max_err = 0;
  for (int it = 0; it < 1000; ++it) {
    CameraIntrinsics K{rng.uniform(50, 800), rng.uniform(50, 800), rng.uniform(-20, 300),
                       rng.uniform(-20, 300)};
    RigidPose pose{random_rotation(rng),
                   {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)}};
    pose.validate();
    const PixelCoord px{rng.uniform(0, 640), rng.uniform(0, 480)};
    const double d = rng.uniform(0.1, 8.0);

    const Vec3 world = unproject_pixel(K, pose, px, d);
    const Projection back = project_point(K, pose, world);
    max_err = std::max({max_err, std::abs(back.pixel.u - px.u), std::abs(back.pixel.v - px.v),
                        std::abs(back.depth - d)});

    // opposite composition
    const Vec3 pt{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    try {
      const Projection pr = project_point(K, pose, pt);
      const Vec3 again = unproject_pixel(K, pose, pr.pixel, pr.depth);
      max_err = std::max(max_err, (again - pt).norm());
    } catch (const ValidationError&) {
      // behind the camera; skip
    }
  }
  CHECK(max_err < 1e-9);
}

TEST_CASE("unproject_frame counts valid pixels and re-projects onto source pixels") {
  CameraIntrinsics K;
  RigidPose pose;

  DepthFrame empty;
  empty.width = 4;
  empty.height = 3;
  empty.depth.assign(12, 0.0);
  empty.color.assign(12, {0, 0, 0});
  const FrameCloud none = unproject_frame(empty, K, pose);
  CHECK(none.cloud.size() == 0);
  CHECK(std::all_of(none.pixel_to_point.begin(), none.pixel_to_point.end(),
                    [](std::int64_t v) { return v == -1; }));

  DepthFrame f;
  f.width = 2;
  f.height = 2;
  f.depth.assign(4, 1.0);
  f.color = {{0.1, 0, 0}, {0.2, 0, 0}, {0.3, 0, 0}, {0.4, 0, 0}};
  const FrameCloud fc = unproject_frame(f, K, pose);
  REQUIRE(fc.cloud.size() == 4);
  for (int v = 0; v < 2; ++v)
    for (int u = 0; u < 2; ++u) {
      const std::int64_t idx = fc.pixel_to_point[v * 2 + u];
      REQUIRE(idx >= 0);
      const Projection pr = project_point(K, pose, fc.cloud.positions[idx]);
      CHECK(pr.pixel.u == doctest::Approx(u).epsilon(1e-12));
      CHECK(pr.pixel.v == doctest::Approx(v).epsilon(1e-12));
      CHECK(fc.cloud.colors[idx].x == doctest::Approx(0.1 * (v * 2 + u + 1)));
    }

  DepthFrame part;
  part.width = 5;
  part.height = 2;
  part.depth.assign(10, 0.0);
  part.depth[1] = 1.0;
  part.depth[4] = 2.0;
  part.depth[7] = 0.5;
  part.color.assign(10, {0, 0, 0});
  CHECK(unproject_frame(part, K, pose).cloud.size() == 3);
}

TEST_CASE("voxel_downsample centroids match brute-force grouping") {
  SUBCASE("single cell") {
    PointCloud c;
    c.positions = {{0.01, 0.01, 0.01}, {0.02, 0.03, 0.01}, {0.03, 0.02, 0.02}};
    c.colors = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const DownsampleResult r = voxel_downsample(c, 0.1);
    REQUIRE(r.cloud.size() == 1);
    CHECK(r.cloud.positions[0].x == doctest::Approx(0.02));
    CHECK(r.cloud.colors[0].x == doctest::Approx(1.0 / 3));
    CHECK(r.point_to_voxel == std::vector<std::size_t>{0, 0, 0});
  }
  SUBCASE("grid-separated points are a no-op") {
    PointCloud c;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        c.positions.push_back({i * 1.0 + 0.5, j * 1.0 + 0.5, 0.5});
        c.colors.push_back({0, 0, 0});
      }
    CHECK(voxel_downsample(c, 1.0).cloud.size() == c.size());
  }
  SUBCASE("random cloud vs brute force") {
    Rng rng(7);
    const PointCloud c = random_cloud(rng, 300, 0.5);
    const double s = 0.13;
    const DownsampleResult r = voxel_downsample(c, s);
    CHECK(r.cloud.size() <= c.size());

    std::map<std::array<std::int64_t, 3>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < c.size(); ++i)
      groups[VoxelGrid::cell_of(c.positions[i], s)].push_back(i);
    REQUIRE(groups.size() == r.cloud.size());
    std::size_t vi = 0;
    for (const auto& [cell, members] : groups) {
      Vec3 mean{0, 0, 0};
      for (std::size_t m : members) mean += c.positions[m];
      mean = mean / double(members.size());
      CHECK((r.cloud.positions[vi] - mean).norm() < 1e-12);
      for (std::size_t m : members) CHECK(r.point_to_voxel[m] == vi);
      ++vi;
    }
  }
}

TEST_CASE("fps_sample greedy trace, determinism, exhaustive case") {
  PointCloud line;
  for (int i = 0; i < 10; ++i) {
    line.positions.push_back({double(i), 0, 0});
    line.colors.push_back({0, 0, 0});
  }
  const auto picks = fps_sample_from(line, 3, 0);
  CHECK(picks == std::vector<std::size_t>{0, 9, 4});

  Rng rng(55);
  const PointCloud c = random_cloud(rng, 40);
  const auto a = fps_sample(c, 1, 123);
  const auto b = fps_sample(c, 1, 123);
  CHECK(a == b);

  const auto all = fps_sample(c, c.size(), 9);
  std::set<std::size_t> uniq(all.begin(), all.end());
  CHECK(uniq.size() == c.size());

  CHECK_THROWS_AS(fps_sample(c, c.size() + 1, 0), ValidationError);
}

TEST_CASE("fourier_encode shape, zero case, half-period case, clamping") {
  const Aabb box{{0, 0, 0}, {1, 1, 1}};
  const int bands = 6;
  const auto at_min = fourier_encode({0, 0, 0}, bands, box);
  REQUIRE(at_min.size() == std::size_t(6 * bands));
  for (std::size_t i = 0; i < at_min.size(); i += 2) {
    CHECK(at_min[i] == doctest::Approx(0.0));      // sin
    CHECK(at_min[i + 1] == doctest::Approx(1.0));  // cos
  }

  const auto mid = fourier_encode({0.5, 0, 0}, 1, box);
  CHECK(mid[0] == doctest::Approx(1.0));  // sin(pi/2)
  CHECK(std::abs(mid[1]) < 1e-12);        // cos(pi/2)

  std::uint64_t clamped = 0;
  fourier_encode({2, 0.5, -3}, 2, box, &clamped);
  CHECK(clamped == 2);
}

TEST_CASE("knn_graph matches brute force") {
  SUBCASE("two points") {
    PointCloud c;
    c.positions = {{0, 0, 0}, {1, 0, 0}};
    c.colors.assign(2, {0, 0, 0});
    const auto edges = knn_graph(c, 1);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0].a == 0);
    CHECK(edges[0].b == 1);
    CHECK(edges[0].length == doctest::Approx(1.0));
  }
  SUBCASE("unit grid k=1 gives unit edges") {
    PointCloud c;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        c.positions.push_back({double(i), double(j), 0});
        c.colors.push_back({0, 0, 0});
      }
    for (const Edge& e : knn_graph(c, 1)) CHECK(e.length == doctest::Approx(1.0));
  }
  SUBCASE("random cloud vs O(N^2) oracle") {
    Rng rng(77);
    const PointCloud c = random_cloud(rng, 120);
    const std::size_t k = 4;
    const auto edges = knn_graph(c, k);

    std::set<std::pair<std::size_t, std::size_t>> expect;
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> d;
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (j == i) continue;
        d.emplace_back((c.positions[i] - c.positions[j]).norm2(), j);
      }
      std::sort(d.begin(), d.end());
      for (std::size_t t = 0; t < k; ++t)
        expect.emplace(std::min(i, d[t].second), std::max(i, d[t].second));
    }
    std::set<std::pair<std::size_t, std::size_t>> got;
    for (const Edge& e : edges) got.emplace(e.a, e.b);
    CHECK(got == expect);
  }
}

TEST_CASE("estimate_normals on planes and degenerate input") {
  Rng rng(31);
  SUBCASE("plane z=0") {
    PointCloud c = random_cloud(rng, 80);
    for (Vec3& p : c.positions) p.z = 0;
    const NormalsResult r = estimate_normals(c, 8);
    CHECK(r.degenerate_count == 0);
    for (const Vec3& n : r.normals) {
      CHECK(std::abs(n.x) < 1e-6);
      CHECK(std::abs(n.y) < 1e-6);
      CHECK(n.z == doctest::Approx(1.0));
    }
  }
  SUBCASE("plane x=0 resolves sign to +x") {
    PointCloud c = random_cloud(rng, 80);
    for (Vec3& p : c.positions) p.x = 0;
    const NormalsResult r = estimate_normals(c, 8);
    for (const Vec3& n : r.normals) CHECK(n.x == doctest::Approx(1.0));
  }
  SUBCASE("noisy plane within 2 degrees") {
    PointCloud c = random_cloud(rng, 200);
    for (Vec3& p : c.positions) p.z = rng.normal() * 0.001;
    const NormalsResult r = estimate_normals(c, 12);
    for (const Vec3& n : r.normals) {
      const double angle = std::acos(std::clamp(n.z, -1.0, 1.0)) * 180.0 / M_PI;
      CHECK(angle < 2.0);
    }
  }
  SUBCASE("colinear neighborhood flags degenerate") {
    PointCloud c;
    for (int i = 0; i < 10; ++i) {
      c.positions.push_back({double(i), 0, 0});
      c.colors.push_back({0, 0, 0});
    }
    const NormalsResult r = estimate_normals(c, 4);
    CHECK(r.degenerate_count == c.size());
    for (const Vec3& n : r.normals) CHECK(n == Vec3{0, 0, 1});
  }
}

TEST_CASE("sym_eigen3 recovers a known spectrum") {
  // diag(1,2,3) conjugated by a rotation
  Rng rng(5);
  const Mat3 r = random_rotation(rng);
  Mat3 d;
  d.m = {1, 0, 0, 0, 2, 0, 0, 0, 3};
  const Mat3 m = r * d * r.transposed();
  const SymEigen3 e = sym_eigen3(m);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(2.0));
  CHECK(e.values[2] == doctest::Approx(3.0));
  for (int i = 0; i < 3; ++i) {
    const Vec3 mv = m * e.vectors[i];
    CHECK((mv - e.vectors[i] * e.values[i]).norm() < 1e-9);
  }
}

TEST_CASE("pose validation rejects reflections and non-orthonormal matrices") {
  RigidPose pose;
  pose.rotation.m = {1, 0, 0, 0, 1, 0, 0, 0, -1};  // det = -1
  CHECK_THROWS_AS(pose.validate(), ValidationError);
  pose.rotation.m = {1, 0.1, 0, 0, 1, 0, 0, 0, 1};
  CHECK_THROWS_AS(pose.validate(), ValidationError);
}
