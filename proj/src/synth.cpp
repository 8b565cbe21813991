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

#include "pcseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace pcseg::synth {

namespace {

enum class Shape { kBox, kSphere, kCylinder };

struct ObjectSpec {
  Shape shape;
  Vec3 center;
  Vec3 half;     // box half extents; sphere/cylinder use half.x as radius,
                 // cylinder half.z as half height
  Vec3 color;
  Aabb aabb() const {
    switch (shape) {
      case Shape::kBox:
        return {center - half, center + half};
      case Shape::kSphere:
        return {center - Vec3{half.x, half.x, half.x}, center + Vec3{half.x, half.x, half.x}};
      case Shape::kCylinder:
      default:
        return {center - Vec3{half.x, half.x, half.z}, center + Vec3{half.x, half.x, half.z}};
    }
  }
};

Vec3 hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

Vec3 sample_box_surface(Rng& rng, const Vec3& center, const Vec3& half) {
  const double ax = half.y * half.z, ay = half.x * half.z, az = half.x * half.y;
  const double total = 2 * (ax + ay + az);
  double pick = rng.uniform(0, total);
  const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
  Vec3 p = center;
  if (pick < 2 * ax) {
    p.x += (pick < ax ? half.x : -half.x);
    p.y += u * half.y;
    p.z += v * half.z;
  } else if (pick < 2 * ax + 2 * ay) {
    pick -= 2 * ax;
    p.y += (pick < ay ? half.y : -half.y);
    p.x += u * half.x;
    p.z += v * half.z;
  } else {
    pick -= 2 * ax + 2 * ay;
    p.z += (pick < az ? half.z : -half.z);
    p.x += u * half.x;
    p.y += v * half.y;
  }
  return p;
}

Vec3 sample_sphere_surface(Rng& rng, const Vec3& center, double radius) {
  Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
  const double n = dir.norm();
  dir = n > 1e-12 ? dir / n : Vec3{0, 0, 1};
  return center + dir * radius;
}

Vec3 sample_cylinder_surface(Rng& rng, const Vec3& center, double radius, double half_h) {
  const double side = 2 * M_PI * radius * (2 * half_h);
  const double caps = 2 * M_PI * radius * radius;
  const double theta = rng.uniform(0, 2 * M_PI);
  if (rng.uniform(0, side + caps) < side) {
    return center + Vec3{radius * std::cos(theta), radius * std::sin(theta),
                         rng.uniform(-half_h, half_h)};
  }
  const double r = radius * std::sqrt(rng.uniform01());
  const double z = rng.uniform01() < 0.5 ? half_h : -half_h;
  return center + Vec3{r * std::cos(theta), r * std::sin(theta), z};
}

geom::RigidPose look_at(const Vec3& eye, const Vec3& target) {
  Vec3 forward = target - eye;
  forward = forward / forward.norm();
  const Vec3 up{0, 0, 1};
  Vec3 right = forward.cross(up);
  const double rn = right.norm();
  right = rn > 1e-9 ? right / rn : Vec3{1, 0, 0};
  const Vec3 down = forward.cross(right);
  geom::RigidPose pose;
  pose.rotation.m = {right.x, right.y, right.z, down.x, down.y, down.z,
                     forward.x, forward.y, forward.z};
  pose.translation = pose.rotation * eye * -1.0;
  return pose;
}

struct LabeledCloud {
  geom::PointCloud cloud;
  std::vector<int> object_ids;
};

// Applies boundary erosion and random straight-line splits to one frame's
// masks, scoring each result by IoU against its unperturbed raster.
void perturb_masks(mask::MaskSet2D& ms, const SynthSpec& spec, Rng& rng) {
  const int w = ms.width, h = ms.height;
  const auto at = [&](const std::vector<std::uint8_t>& r, int u, int v) -> bool {
    return u >= 0 && u < w && v >= 0 && v < h && r[static_cast<std::size_t>(v) * w + u];
  };
  int next_id = 0;
  for (const mask::Mask2D& m : ms.masks) next_id = std::max(next_id, m.id + 1);

  std::vector<mask::Mask2D> result;
  for (mask::Mask2D& m : ms.masks) {
    const std::vector<std::uint8_t> original = m.raster;

    std::vector<std::uint8_t> eroded = original;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * w + u;
        if (!original[idx]) continue;
        const bool boundary = !at(original, u - 1, v) || !at(original, u + 1, v) ||
                              !at(original, u, v - 1) || !at(original, u, v + 1);
        if (boundary && rng.uniform01() < spec.erode_prob) eroded[idx] = 0;
      }
    }

    const auto iou_vs_original = [&](const std::vector<std::uint8_t>& r) {
      std::size_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        inter += (r[i] && original[i]);
        uni += (r[i] || original[i]);
      }
      return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
    };

    const bool split = rng.uniform01() < spec.split_prob;
    if (split) {
      double cu = 0, cv = 0, count = 0;
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
          if (eroded[static_cast<std::size_t>(v) * w + u]) {
            cu += u;
            cv += v;
            ++count;
          }
      if (count >= 8) {
        cu /= count;
        cv /= count;
        const double theta = rng.uniform(0, M_PI);
        const double nx = std::cos(theta), ny = std::sin(theta);
        mask::Mask2D near, far;
        near.id = m.id;
        far.id = next_id++;
        near.raster.assign(eroded.size(), 0);
        far.raster.assign(eroded.size(), 0);
        for (int v = 0; v < h; ++v)
          for (int u = 0; u < w; ++u) {
            const std::size_t idx = static_cast<std::size_t>(v) * w + u;
            if (!eroded[idx]) continue;
            ((u - cu) * nx + (v - cv) * ny > 0 ? far : near).raster[idx] = 1;
          }
        for (mask::Mask2D* part : {&near, &far}) {
          if (part->pixel_count() == 0) continue;
          part->score = iou_vs_original(part->raster);
          result.push_back(std::move(*part));
        }
        continue;
      }
    }
    if (eroded == original) {
      m.score = 1.0;
    } else {
      m.score = iou_vs_original(eroded);
      m.raster = std::move(eroded);
    }
    if (m.pixel_count() > 0) result.push_back(std::move(m));
  }
  ms.masks = std::move(result);
}

}  // namespace

void SynthSpec::validate() const {
  if (object_count_min < 1 || object_count_max < object_count_min)
    throw ValidationError("synth: bad object count range");
  if (points_per_object_min < 10 || points_per_object_max < points_per_object_min)
    throw ValidationError("synth: bad points-per-object range");
  if (frames_per_scene < 1) throw ValidationError("synth: need at least one frame");
  if (masks_per_frame_target < 1) throw ValidationError("synth: bad masks-per-frame target");
  if (image_width < 8 || image_height < 8) throw ValidationError("synth: image too small");
  if (shell_points < 100) throw ValidationError("synth: too few shell points");
  for (int a = 0; a < 3; ++a) {
    if (!(room_extent_min[a] > 0) || room_extent_max[a] < room_extent_min[a])
      throw ValidationError("synth: bad room extent range");
  }
  if (erode_prob < 0 || erode_prob > 1 || split_prob < 0 || split_prob > 1)
    throw ValidationError("synth: perturbation probabilities must be in [0,1]");
}

Rendered render_view(const geom::PointCloud& cloud, const std::vector<int>& object_ids,
                     const geom::CameraIntrinsics& k, const geom::RigidPose& pose, int width,
                     int height) {
  Rendered out;
  out.frame.width = width;
  out.frame.height = height;
  const std::size_t n_pix = static_cast<std::size_t>(width) * height;
  out.frame.depth.assign(n_pix, 0.0);
  out.frame.color.assign(n_pix, {0, 0, 0});
  out.pixel_object.assign(n_pix, -1);
  std::vector<double> zbuf(n_pix, std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 cam = pose.rotation * cloud.positions[i] + pose.translation;
    if (!(cam.z > 0) || cam.z > 65.0) continue;
    const double u = k.fx * cam.x / cam.z + k.cx;
    const double v = k.fy * cam.y / cam.z + k.cy;
    const int iu = static_cast<int>(std::lround(u));
    const int iv = static_cast<int>(std::lround(v));
    if (iu < 0 || iu >= width || iv < 0 || iv >= height) continue;
    const std::size_t idx = static_cast<std::size_t>(iv) * width + iu;
    if (cam.z < zbuf[idx]) {
      zbuf[idx] = cam.z;
      // quantize to the millimeter precision of the depth file format
      out.frame.depth[idx] = std::round(cam.z * 1000.0) / 1000.0;
      out.frame.color[idx] = cloud.colors[i];
      out.pixel_object[idx] = object_ids[i];
    }
  }
  return out;
}

io::SceneRecord generate(const SynthSpec& spec, const std::string& scene_id) {
  spec.validate();
  Rng rng(spec.seed);
  Rng layout_rng = rng.fork(1);
  Rng sample_rng = rng.fork(2);
  Rng camera_rng = rng.fork(3);
  Rng perturb_rng = rng.fork(4);

  const Vec3 room{layout_rng.uniform(spec.room_extent_min.x, spec.room_extent_max.x),
                  layout_rng.uniform(spec.room_extent_min.y, spec.room_extent_max.y),
                  layout_rng.uniform(spec.room_extent_min.z, spec.room_extent_max.z)};

  // -- place disjoint objects --------------------------------------------------
  const int n_objects =
      spec.object_count_min +
      static_cast<int>(layout_rng.uniform_int(spec.object_count_max - spec.object_count_min + 1));
  std::vector<ObjectSpec> objects;
  const double margin = 0.15;
  for (int i = 0; i < n_objects; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      ObjectSpec obj;
      obj.shape = static_cast<Shape>(i % 3);
      const double base = layout_rng.uniform(0.14, 0.32);
      obj.half = {base, layout_rng.uniform(0.14, 0.32), layout_rng.uniform(0.14, 0.38)};
      if (obj.shape != Shape::kBox) obj.half.x = std::min(obj.half.x, 0.26);
      const Aabb probe = obj.aabb();
      const Vec3 size = probe.extent() * 0.5;
      obj.center = {layout_rng.uniform(margin + size.x, room.x - margin - size.x),
                    layout_rng.uniform(margin + size.y, room.y - margin - size.y),
                    layout_rng.uniform01() < 0.6
                        ? size.z + 0.001
                        : layout_rng.uniform(size.z + 0.1, room.z * 0.6)};
      const Aabb box = obj.aabb().inflated(0.25);
      const bool collides = std::any_of(objects.begin(), objects.end(), [&](const ObjectSpec& o) {
        const Aabb other = o.aabb().inflated(0.25);
        return box.min.x < other.max.x && other.min.x < box.max.x && box.min.y < other.max.y &&
               other.min.y < box.max.y && box.min.z < other.max.z && other.min.z < box.max.z;
      });
      if (collides) continue;
      obj.color = hsv_to_rgb(std::fmod(0.13 + i * 0.61803398875, 1.0), 0.78, 0.88);
      objects.push_back(obj);
      placed = true;
    }
    if (!placed)
      throw Error("synth: could not place object " + std::to_string(i) + " in scene " + scene_id);
  }

  // -- sample the full cloud ----------------------------------------------------
  LabeledCloud full;
  for (int i = 0; i < n_objects; ++i) {
    const ObjectSpec& obj = objects[i];
    const int count = spec.points_per_object_min +
                      static_cast<int>(sample_rng.uniform_int(
                          spec.points_per_object_max - spec.points_per_object_min + 1));
    for (int p = 0; p < count; ++p) {
      Vec3 pos;
      switch (obj.shape) {
        case Shape::kBox: pos = sample_box_surface(sample_rng, obj.center, obj.half); break;
        case Shape::kSphere: pos = sample_sphere_surface(sample_rng, obj.center, obj.half.x); break;
        case Shape::kCylinder:
        default:
          pos = sample_cylinder_surface(sample_rng, obj.center, obj.half.x, obj.half.z);
          break;
      }
      Vec3 col = obj.color;
      for (int a = 0; a < 3; ++a)
        col[a] = std::clamp(col[a] + sample_rng.uniform(-0.02, 0.02), 0.0, 1.0);
      full.cloud.positions.push_back(pos);
      full.cloud.colors.push_back(col);
      full.object_ids.push_back(i);
    }
  }
  // room shell: 6 faces, each a structural mask
  const double face_area[6] = {room.y * room.z, room.y * room.z, room.x * room.z,
                               room.x * room.z, room.x * room.y, room.x * room.y};
  const double total_area = face_area[0] + face_area[1] + face_area[2] + face_area[3] +
                            face_area[4] + face_area[5];
  for (int face = 0; face < 6; ++face) {
    const int count =
        std::max(20, static_cast<int>(spec.shell_points * face_area[face] / total_area));
    const double gray = 0.62 + 0.05 * face;
    for (int p = 0; p < count; ++p) {
      const double u = sample_rng.uniform01(), v = sample_rng.uniform01();
      Vec3 pos;
      switch (face) {
        case 0: pos = {0, u * room.y, v * room.z}; break;
        case 1: pos = {room.x, u * room.y, v * room.z}; break;
        case 2: pos = {u * room.x, 0, v * room.z}; break;
        case 3: pos = {u * room.x, room.y, v * room.z}; break;
        case 4: pos = {u * room.x, v * room.y, 0}; break;
        case 5:
        default: pos = {u * room.x, v * room.y, room.z}; break;
      }
      const double g = std::clamp(gray + sample_rng.uniform(-0.02, 0.02), 0.0, 1.0);
      full.cloud.positions.push_back(pos);
      full.cloud.colors.push_back({g, g, g});
      full.object_ids.push_back(n_objects + face);
    }
  }

  // -- ground-truth masks ---------------------------------------------------------
  io::SceneRecord scene;
  scene.scene_id = scene_id;
  scene.full_cloud = full.cloud;
  scene.gt_masks.point_count = full.cloud.size();
  for (int id = 0; id < n_objects + 6; ++id) {
    mask::Mask m;
    m.id = id;
    m.structural = id >= n_objects;
    m.membership.assign(full.cloud.size(), 0);
    scene.gt_masks.masks.push_back(std::move(m));
  }
  for (std::size_t i = 0; i < full.cloud.size(); ++i)
    scene.gt_masks.masks[full.object_ids[i]].membership[i] = 1;

  // -- render frames ----------------------------------------------------------------
  const geom::CameraIntrinsics k{0.62 * spec.image_width, 0.62 * spec.image_width,
                                 (spec.image_width - 1) / 2.0, (spec.image_height - 1) / 2.0};
  const Vec3 center{room.x / 2, room.y / 2, room.z * 0.35};
  const double orbit = 0.33 * std::min(room.x, room.y);
  for (int f = 0; f < spec.frames_per_scene; ++f) {
    const double angle =
        2 * M_PI * f / spec.frames_per_scene + camera_rng.uniform(-0.08, 0.08);
    const double height = room.z * camera_rng.uniform(0.45, 0.7);
    const Vec3 eye{room.x / 2 + orbit * std::cos(angle), room.y / 2 + orbit * std::sin(angle),
                   height};
    const geom::RigidPose pose = look_at(eye, center);

    Rendered r =
        render_view(full.cloud, full.object_ids, k, pose, spec.image_width, spec.image_height);

    io::FrameBundle bundle;
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04d", f);
    bundle.frame_id = buf;
    bundle.frame = std::move(r.frame);
    bundle.intrinsics = k;
    bundle.pose = pose;
    bundle.masks2d.width = spec.image_width;
    bundle.masks2d.height = spec.image_height;
    for (int id = 0; id < n_objects + 6; ++id) {
      mask::Mask2D m;
      m.id = id;
      m.score = 1.0;
      m.raster.assign(r.pixel_object.size(), 0);
      std::size_t count = 0;
      for (std::size_t pix = 0; pix < r.pixel_object.size(); ++pix)
        if (r.pixel_object[pix] == id) {
          m.raster[pix] = 1;
          ++count;
        }
      if (count > 0) bundle.masks2d.masks.push_back(std::move(m));
    }
    if (spec.perturb) {
      Rng frame_rng = perturb_rng.fork(f);
      perturb_masks(bundle.masks2d, spec, frame_rng);
    }
    if (static_cast<int>(bundle.masks2d.masks.size()) > spec.masks_per_frame_target) {
      std::stable_sort(bundle.masks2d.masks.begin(), bundle.masks2d.masks.end(),
                       [](const mask::Mask2D& a, const mask::Mask2D& b) {
                         return a.pixel_count() > b.pixel_count();
                       });
      bundle.masks2d.masks.resize(spec.masks_per_frame_target);
      std::sort(bundle.masks2d.masks.begin(), bundle.masks2d.masks.end(),
                [](const mask::Mask2D& a, const mask::Mask2D& b) { return a.id < b.id; });
    }
    scene.frames.push_back(std::move(bundle));
  }
  return scene;
}

}  // namespace pcseg::synth
