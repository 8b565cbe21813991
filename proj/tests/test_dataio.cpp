#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pcseg/dataio.hpp"
#include "pcseg/synth.hpp"
#include "support/test_utils.hpp"

using namespace pcseg;
using namespace pcseg::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pcseg_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

geom::DepthFrame random_frame(Rng& rng, int w, int h) {
  geom::DepthFrame f;
  f.width = w;
  f.height = h;
  f.depth.resize(static_cast<std::size_t>(w) * h);
  f.color.resize(f.depth.size());
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    f.depth[i] = rng.uniform01() < 0.2 ? 0.0 : std::round(rng.uniform(0.3, 6.0) * 1000) / 1000.0;
    f.color[i] = {std::round(rng.uniform01() * 255) / 255.0,
                  std::round(rng.uniform01() * 255) / 255.0,
                  std::round(rng.uniform01() * 255) / 255.0};
  }
  return f;
}

}  // namespace

TEST_CASE("depth pgm round-trip is exact at millimeter precision") {
  TempDir tmp;
  Rng rng(1);
  const geom::DepthFrame f = random_frame(rng, 17, 9);
  save_depth_pgm(tmp.path / "d.pgm", f);
  geom::DepthFrame loaded;
  load_depth_pgm(tmp.path / "d.pgm", loaded);
  REQUIRE(loaded.width == f.width);
  REQUIRE(loaded.height == f.height);
  for (std::size_t i = 0; i < f.depth.size(); ++i)
    CHECK(loaded.depth[i] == doctest::Approx(f.depth[i]).epsilon(1e-12));

  // byte-stability: save(load(x)) == save(x)
  loaded.color = f.color;
  save_depth_pgm(tmp.path / "d2.pgm", loaded);
  CHECK(slurp(tmp.path / "d.pgm") == slurp(tmp.path / "d2.pgm"));
}

TEST_CASE("color ppm round-trip and dimension validation") {
  TempDir tmp;
  Rng rng(2);
  const geom::DepthFrame f = random_frame(rng, 8, 6);
  save_color_ppm(tmp.path / "c.ppm", f);
  geom::DepthFrame loaded;
  loaded.width = loaded.height = 0;
  load_color_ppm(tmp.path / "c.ppm", loaded);
  for (std::size_t i = 0; i < f.color.size(); ++i)
    CHECK((loaded.color[i] - f.color[i]).norm() < 1e-12);

  geom::DepthFrame wrong;
  wrong.width = 4;
  wrong.height = 4;
  CHECK_THROWS_AS(load_color_ppm(tmp.path / "c.ppm", wrong), ValidationError);
}

TEST_CASE("intrinsics and pose files round-trip; bad poses rejected") {
  TempDir tmp;
  Rng rng(3);
  const geom::CameraIntrinsics k{321.5, 322.25, 150.125, 120.0625};
  save_intrinsics(tmp.path / "k.txt", k);
  const geom::CameraIntrinsics k2 = load_intrinsics(tmp.path / "k.txt");
  CHECK(k2.fx == k.fx);
  CHECK(k2.fy == k.fy);
  CHECK(k2.cx == k.cx);
  CHECK(k2.cy == k.cy);

  geom::RigidPose pose{testutil::random_rotation(rng), {0.25, -1.5, 2.0}};
  save_pose(tmp.path / "p.txt", pose);
  const geom::RigidPose p2 = load_pose(tmp.path / "p.txt");
  for (int i = 0; i < 9; ++i) CHECK(p2.rotation.m[i] == pose.rotation.m[i]);

  std::ofstream bad(tmp.path / "bad.txt");
  bad << "1 0 0 0\n0 1 0 0\n0 0 -1 0\n";  // det = -1
  bad.close();
  CHECK_THROWS_AS(load_pose(tmp.path / "bad.txt"), ValidationError);
}

TEST_CASE("ply binary round-trip is lossless; ascii within 1e-6; errors are named") {
  TempDir tmp;
  Rng rng(4);
  geom::PointCloud cloud = testutil::random_cloud(rng, 64, 3.0);
  // quantize colors to the uchar precision the format declares
  for (Vec3& c : cloud.colors)
    c = {std::round(c.x * 255) / 255.0, std::round(c.y * 255) / 255.0,
         std::round(c.z * 255) / 255.0};
  std::vector<int> labels(cloud.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 5) - 1;

  SUBCASE("binary with labels") {
    save_cloud(tmp.path / "c.ply", cloud, &labels);
    const LoadedCloud lc = load_cloud(tmp.path / "c.ply");
    REQUIRE(lc.cloud.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(lc.cloud.positions[i] == cloud.positions[i]);  // bit-exact doubles
      CHECK((lc.cloud.colors[i] - cloud.colors[i]).norm() < 1e-12);
    }
    CHECK(lc.labels == labels);
  }
  SUBCASE("ascii") {
    PlyOptions opts;
    opts.binary = false;
    save_cloud(tmp.path / "c.ply", cloud, nullptr, opts);
    const LoadedCloud lc = load_cloud(tmp.path / "c.ply");
    double max_d = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      max_d = std::max(max_d, (lc.cloud.positions[i] - cloud.positions[i]).norm());
    CHECK(max_d < 1e-6);
  }
  SUBCASE("normals preserved") {
    cloud.normals.assign(cloud.size(), Vec3{0, 0, 1});
    save_cloud(tmp.path / "n.ply", cloud);
    const LoadedCloud lc = load_cloud(tmp.path / "n.ply");
    REQUIRE(lc.cloud.has_normals());
    CHECK(lc.cloud.normals[0] == Vec3{0, 0, 1});
  }
  SUBCASE("unknown property is a named parse error") {
    std::ofstream out(tmp.path / "bad.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\n"
           "property double z\nproperty double curvature\nend_header\n0 0 0 0\n";
    out.close();
    try {
      load_cloud(tmp.path / "bad.ply");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("curvature") != std::string::npos);
    }
  }
  SUBCASE("truncated binary is an explicit error") {
    save_cloud(tmp.path / "c.ply", cloud);
    std::string bytes = slurp(tmp.path / "c.ply");
    bytes.resize(bytes.size() - 11);
    std::ofstream out(tmp.path / "t.ply", std::ios::binary);
    out << bytes;
    out.close();
    try {
      load_cloud(tmp.path / "t.ply");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
}

TEST_CASE("mask set json round-trips") {
  TempDir tmp;
  mask::MaskSet ms;
  ms.point_count = 10;
  mask::Mask a;
  a.id = 0;
  a.score = 0.75;
  a.membership = {1, 1, 0, 0, 0, 0, 0, 0, 1, 0};
  mask::Mask b;
  b.id = 3;
  b.structural = true;
  b.membership = {0, 0, 1, 1, 1, 0, 0, 0, 0, 0};
  ms.masks = {a, b};
  save_masks(tmp.path / "m.json", ms);
  const mask::MaskSet loaded = load_masks(tmp.path / "m.json");
  REQUIRE(loaded.masks.size() == 2);
  CHECK(loaded.masks[0].membership == a.membership);
  CHECK(*loaded.masks[0].score == 0.75);
  CHECK_FALSE(loaded.masks[1].score.has_value());
  CHECK(loaded.masks[1].structural);
}

TEST_CASE("frame bundle save/load is field-exact and validates dimensions") {
  TempDir tmp;
  Rng rng(5);
  io::FrameBundle bundle;
  bundle.frame_id = "frame_0000";
  bundle.frame = random_frame(rng, 12, 8);
  bundle.intrinsics = {40.0, 40.0, 5.5, 3.5};
  bundle.pose = {testutil::random_rotation(rng), {0.5, 0.25, 1.0}};
  bundle.masks2d.width = 12;
  bundle.masks2d.height = 8;
  mask::Mask2D m;
  m.id = 0;
  m.score = 0.5;
  m.raster.assign(96, 0);
  for (int i = 0; i < 20; ++i) m.raster[i] = 1;
  bundle.masks2d.masks.push_back(m);

  save_frame_bundle(tmp.path / "frame_0000", bundle);
  const io::FrameBundle loaded = load_frame_bundle(tmp.path / "frame_0000");
  CHECK(loaded.frame.depth == bundle.frame.depth);
  CHECK(loaded.masks2d.masks[0].raster == m.raster);
  for (int i = 0; i < 9; ++i)
    CHECK(loaded.pose.rotation.m[i] == doctest::Approx(bundle.pose.rotation.m[i]).epsilon(1e-15));

  // dimension mismatch must fail on save
  io::FrameBundle broken = bundle;
  broken.masks2d.width = 11;
  broken.masks2d.masks[0].raster.assign(88, 0);
  CHECK_THROWS_AS(save_frame_bundle(tmp.path / "broken", broken), ValidationError);
}

TEST_CASE("synthetic scenes are deterministic and save/load losslessly") {
  TempDir tmp;
  synth::SynthSpec spec;
  spec.seed = 42;
  spec.object_count_min = 2;
  spec.object_count_max = 3;
  spec.points_per_object_min = 80;
  spec.points_per_object_max = 120;
  spec.shell_points = 400;
  spec.frames_per_scene = 2;
  spec.image_width = 32;
  spec.image_height = 24;

  const io::SceneRecord a = synth::generate(spec, "scene_0000");
  const io::SceneRecord b = synth::generate(spec, "scene_0000");
  REQUIRE(a.full_cloud.size() == b.full_cloud.size());
  CHECK(a.full_cloud.positions == b.full_cloud.positions);
  CHECK(a.frames[0].frame.depth == b.frames[0].frame.depth);

  save_scene(tmp.path / "scene_0000", a);
  save_scene(tmp.path / "scene_0001", a);
  CHECK(slurp(tmp.path / "scene_0000" / "full_cloud.ply") ==
        slurp(tmp.path / "scene_0001" / "full_cloud.ply"));

  const io::SceneRecord loaded = load_scene(tmp.path / "scene_0000");
  CHECK(loaded.full_cloud.positions == a.full_cloud.positions);
  CHECK(loaded.gt_masks.masks.size() == a.gt_masks.masks.size());
  CHECK(loaded.frames.size() == a.frames.size());
  CHECK(loaded.frames[0].frame.depth == a.frames[0].frame.depth);

  CHECK(list_scenes(tmp.path).size() == 2);
}

TEST_CASE("rendered depth equals nearest sample along each pixel ray") {
  synth::SynthSpec spec;
  spec.seed = 7;
  spec.object_count_min = 2;
  spec.object_count_max = 3;
  spec.points_per_object_min = 150;
  spec.points_per_object_max = 200;
  spec.shell_points = 600;
  spec.frames_per_scene = 1;
  spec.image_width = 32;
  spec.image_height = 24;
  const io::SceneRecord scene = synth::generate(spec, "s");
  const io::FrameBundle& f = scene.frames[0];

  // brute force: nearest camera-frame z among samples that land on the pixel
  Rng rng(99);
  int checked = 0;
  for (int it = 0; it < 2000 && checked < 100; ++it) {
    const int u = static_cast<int>(rng.uniform_int(spec.image_width));
    const int v = static_cast<int>(rng.uniform_int(spec.image_height));
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : scene.full_cloud.positions) {
      const Vec3 cam = f.pose.rotation * p + f.pose.translation;
      if (!(cam.z > 0)) continue;
      const int iu = static_cast<int>(std::lround(f.intrinsics.fx * cam.x / cam.z +
                                                  f.intrinsics.cx));
      const int iv = static_cast<int>(std::lround(f.intrinsics.fy * cam.y / cam.z +
                                                  f.intrinsics.cy));
      if (iu == u && iv == v) best = std::min(best, cam.z);
    }
    const double stored = f.frame.depth_at(u, v);
    if (!std::isfinite(best)) {
      CHECK(stored == 0.0);
    } else {
      CHECK(stored == doctest::Approx(std::round(best * 1000) / 1000.0).epsilon(1e-12));
      ++checked;
    }
  }
  CHECK(checked >= 50);
}

TEST_CASE("single-object frame pixels belong to the object or the shell") {
  synth::SynthSpec spec;
  spec.seed = 11;
  spec.object_count_min = 1;
  spec.object_count_max = 1;
  spec.points_per_object_min = 200;
  spec.points_per_object_max = 200;
  spec.shell_points = 500;
  spec.frames_per_scene = 1;
  spec.image_width = 32;
  spec.image_height = 24;
  const io::SceneRecord scene = synth::generate(spec, "s");
  const mask::MaskSet2D& ms = scene.frames[0].masks2d;
  REQUIRE(!ms.masks.empty());
  // ids: 0 = the object, 1..6 = shell faces
  for (const mask::Mask2D& m : ms.masks) CHECK(m.id <= 6);
  // every valid-depth pixel is covered by exactly one mask
  const geom::DepthFrame& frame = scene.frames[0].frame;
  for (std::size_t pix = 0; pix < frame.depth.size(); ++pix) {
    int cover = 0;
    for (const mask::Mask2D& m : ms.masks) cover += m.raster[pix];
    CHECK(cover == (frame.depth[pix] > 0 ? 1 : 0));
  }
}
