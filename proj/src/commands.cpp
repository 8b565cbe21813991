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

#include "pcseg/commands.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "pcseg/kernels.hpp"
#include "pcseg/mask_lifting.hpp"
#include "pcseg/pseudo_labels.hpp"
#include "pcseg/sam3d_merge.hpp"

namespace pcseg::cmd {

using nlohmann::json;

void Logger::info(const std::string& event, const std::string& detail_json) const {
  if (!sink_) return;
  json line = json::parse(detail_json);
  line["event"] = event;
  line["level"] = "info";
  (*sink_) << line.dump() << "\n";
  sink_->flush();
}

namespace {

io::Provenance provenance_of(const cfg::PipelineConfig& config) {
  return {cfg::config_hash(config), kVersion};
}

std::filesystem::path split_dir(const cfg::PipelineConfig& config, const std::string& split) {
  return config.data_root / "scenes" / split;
}

std::vector<std::filesystem::path> scene_dirs_or_die(const cfg::PipelineConfig& config,
                                                     const std::string& split) {
  const std::filesystem::path dir = split_dir(config, split);
  if (!std::filesystem::exists(dir))
    throw MissingInputError("missing scene split " + dir.string() +
                            "; run `pcseg synth` first");
  const auto dirs = io::list_scenes(dir);
  if (dirs.empty())
    throw MissingInputError("no scenes under " + dir.string() + "; run `pcseg synth` first");
  return dirs;
}

void apply_coordinate_scale(geom::PointCloud& cloud, double scale) {
  if (scale == 1.0) return;
  for (Vec3& p : cloud.positions) p = p / scale;
}

/// Downsamples a labeled cloud; each voxel takes the plurality label of its
/// member points (ties to the lowest id, unlabeled wins only a strict
/// majority... see smooth_masks for the same convention). Scores and
/// structural flags carry over from the source masks.
struct VoxelizedItem {
  geom::PointCloud cloud;
  mask::MaskSet masks;
  std::vector<std::size_t> point_to_voxel;
};

VoxelizedItem voxelize_labeled(const geom::PointCloud& cloud, const mask::MaskSet& masks,
                               double voxel_size) {
  const geom::DownsampleResult down = geom::voxel_downsample(cloud, voxel_size);
  const std::vector<int> labels = masks.to_labels();

  // per voxel: count labels of member points
  std::vector<std::map<int, std::size_t>> votes(down.cloud.size());
  std::vector<std::size_t> unlabeled(down.cloud.size(), 0);
  std::vector<std::size_t> members(down.cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t v = down.point_to_voxel[i];
    ++members[v];
    if (labels[i] < 0)
      ++unlabeled[v];
    else
      ++votes[v][labels[i]];
  }
  std::vector<int> voxel_labels(down.cloud.size(), -1);
  for (std::size_t v = 0; v < down.cloud.size(); ++v) {
    int best_id = -1;
    std::size_t best = 0;
    for (const auto& [id, count] : votes[v]) {
      if (count > best) {  // map iterates ids ascending: ties keep lowest id
        best = count;
        best_id = id;
      }
    }
    if (best_id >= 0 && best >= unlabeled[v]) voxel_labels[v] = best_id;
  }

  VoxelizedItem item;
  item.cloud = down.cloud;
  item.point_to_voxel = down.point_to_voxel;
  item.masks = mask::from_labels(voxel_labels);
  for (mask::Mask& m : item.masks.masks) {
    for (const mask::Mask& src : masks.masks) {
      if (src.id == m.id) {
        m.score = src.score;
        m.structural = src.structural;
        break;
      }
    }
  }
  return item;
}

mask::MaskSet broadcast_masks(const mask::MaskSet& voxel_masks,
                              const std::vector<std::size_t>& point_to_voxel) {
  mask::MaskSet out;
  out.point_count = point_to_voxel.size();
  for (const mask::Mask& m : voxel_masks.masks) {
    mask::Mask b;
    b.id = m.id;
    b.score = m.score;
    b.structural = m.structural;
    b.membership.resize(point_to_voxel.size());
    for (std::size_t i = 0; i < point_to_voxel.size(); ++i)
      b.membership[i] = m.membership[point_to_voxel[i]];
    if (b.member_count() > 0) out.masks.push_back(std::move(b));
  }
  return out;
}

/// Full-resolution prediction on a scene cloud: downsample, run the network,
/// score every query, broadcast memberships back to the original points.
mask::MaskSet predict_scene(const net::NetworkParams& params, const geom::PointCloud& cloud,
                            const cfg::PipelineConfig& config) {
  const geom::DownsampleResult down = geom::voxel_downsample(cloud, config.voxel_size);
  const std::size_t q = std::min(config.query_count_infer, down.cloud.size());
  const net::Prediction pred = net::predict(params, down.cloud, q, config.infer_seed);
  const mask::MaskSet voxel_masks = pseudo::select_masks(pred, 0.0);
  return broadcast_masks(voxel_masks, down.point_to_voxel);
}

std::filesystem::path predictions_dir(const cfg::PipelineConfig& config,
                                      const std::string& tag) {
  return config.output_root / "predictions" / tag;
}

void write_predictions(const cfg::PipelineConfig& config, const std::string& tag,
                       const std::string& scene_id, const mask::MaskSet& masks,
                       const io::Provenance& prov) {
  io::save_masks(predictions_dir(config, tag) / (scene_id + ".masks.json"), masks, prov);
}

mask::MaskSet read_predictions(const cfg::PipelineConfig& config, const std::string& tag,
                               const std::string& scene_id) {
  const auto path = predictions_dir(config, tag) / (scene_id + ".masks.json");
  if (!std::filesystem::exists(path))
    throw MissingInputError("missing predictions " + path.string() +
                            "; run `pcseg infer` (or merge-sam3d/postprocess) first");
  return io::load_masks(path);
}

train::TrainConfig train_config_of(const cfg::PipelineConfig& config, int stage) {
  const cfg::StageConfig& sc = stage == 1 ? config.stage1 : config.stage2;
  train::TrainConfig tc;
  tc.stage = stage;
  tc.steps = sc.steps;
  tc.batch_size = sc.batch_size;
  tc.query_count = config.query_count_train;
  tc.weights = config.loss_weights;
  if (stage == 2) tc.weights.lambda_obj = 0;  // objectness term omitted
  tc.schedule.peak_lr = sc.peak_lr;
  tc.schedule.warmup_frac = config.warmup_frac;
  tc.schedule.warmup_start_frac = config.warmup_start_frac;
  tc.schedule.final_frac = config.final_frac;
  tc.schedule.total_steps = sc.steps;
  tc.weight_decay = sc.weight_decay;
  tc.seed = sc.seed;
  tc.workers = config.workers;
  return tc;
}

void run_training_stage(const cfg::PipelineConfig& config, const Logger& log, int stage,
                        net::NetworkParams& params, const std::vector<train::TrainItem>& items) {
  const train::TrainConfig tc = train_config_of(config, stage);
  train::OptimState state = train::OptimState::init(params, tc.schedule, tc.weight_decay);

  const auto log_path = config.output_root / "logs" /
                        ("stage" + std::to_string(stage) + "_metrics.jsonl");
  std::filesystem::create_directories(log_path.parent_path());
  std::ofstream metrics(log_path);
  const auto on_step = [&](const train::StepLog& s) {
    json line = {{"step", s.step},           {"lr", s.lr},
                 {"total", s.loss.total},    {"dice", s.loss.dice},
                 {"bce", s.loss.bce},        {"objectness", s.loss.objectness},
                 {"matched", s.loss.matched}, {"batch_items", s.batch_items}};
    metrics << line.dump() << "\n";
  };

  const auto ckpt = config.output_root / "checkpoints" /
                    ("stage" + std::to_string(stage) + ".ckpt");
  const io::Provenance prov = provenance_of(config);
  // periodic mid-run checkpoint plus the final one
  const std::size_t half = tc.steps / 2;
  if (half > 0) {
    train::TrainConfig first = tc;
    first.steps = half;
    train::train(params, state, items, first, on_step);
    net::save_checkpoint(ckpt, params, prov);
    train::save_optim_state(ckpt.string() + ".optim", state);
    train::TrainConfig rest = tc;
    rest.steps = tc.steps - half;
    train::train(params, state, items, rest, on_step);
  } else {
    train::train(params, state, items, tc, on_step);
  }
  net::save_checkpoint(ckpt, params, prov);
  train::save_optim_state(ckpt.string() + ".optim", state);
  log.info("stage" + std::to_string(stage) + "_trained",
           json{{"checkpoint", ckpt.string()}, {"steps", state.step}}.dump());
}

}  // namespace

void synth(const cfg::PipelineConfig& config, const Logger& log) {
  const io::Provenance prov = provenance_of(config);
  char name[32];
  for (int split = 0; split < 2; ++split) {
    const std::string split_name = split == 0 ? "train" : "eval";
    const int count = split == 0 ? config.train_scenes : config.eval_scenes;
    for (int i = 0; i < count; ++i) {
      std::snprintf(name, sizeof name, "scene_%04d", i);
      synth::SynthSpec spec = config.synth;
      // distinct deterministic seed per scene and split
      spec.seed = Rng(config.synth.seed).fork(split).fork(i).next_u64();
      const io::SceneRecord scene = synth::generate(spec, name);
      io::save_scene(split_dir(config, split_name) / name, scene, prov);
    }
    log.info("synth_split_done",
             json{{"split", split_name}, {"scenes", count}}.dump());
  }
}

void lift(const cfg::PipelineConfig& config, const Logger& log) {
  const io::Provenance prov = provenance_of(config);
  const auto dirs = scene_dirs_or_die(config, "train");
  std::size_t frames = 0;
  for (const auto& dir : dirs) {
    const io::SceneRecord scene = io::load_scene(dir);
    for (const io::FrameBundle& bundle : scene.frames) {
      lift::LiftResult lifted = lift::lift_frame(bundle, config.min_mask_points);
      apply_coordinate_scale(lifted.cloud, config.coordinate_scale);
      const auto out_dir = config.data_root / "lifted" / scene.scene_id;
      const std::vector<int> labels = lifted.masks.to_labels();
      io::save_cloud(out_dir / (bundle.frame_id + ".ply"), lifted.cloud, &labels,
                     {true, prov});
      io::save_masks(out_dir / (bundle.frame_id + ".masks.json"), lifted.masks, prov);
      ++frames;
    }
  }
  log.info("lift_done", json{{"frames", frames}}.dump());
}

namespace {

std::vector<train::TrainItem> load_stage1_items(const cfg::PipelineConfig& config) {
  const auto lifted_root = config.data_root / "lifted";
  if (!std::filesystem::exists(lifted_root))
    throw MissingInputError("missing lifted frames at " + lifted_root.string() +
                            "; run `pcseg lift` first");
  std::vector<std::filesystem::path> frame_paths;
  for (const auto& scene_dir : std::filesystem::directory_iterator(lifted_root)) {
    if (!scene_dir.is_directory()) continue;
    for (const auto& f : std::filesystem::directory_iterator(scene_dir.path()))
      if (f.path().extension() == ".ply") frame_paths.push_back(f.path());
  }
  std::sort(frame_paths.begin(), frame_paths.end());
  if (frame_paths.empty())
    throw MissingInputError("no lifted frames under " + lifted_root.string() +
                            "; run `pcseg lift` first");

  std::vector<train::TrainItem> items;
  for (const auto& ply : frame_paths) {
    const io::LoadedCloud lc = io::load_cloud(ply);
    std::filesystem::path masks_path = ply;
    masks_path.replace_extension();  // drop .ply
    const mask::MaskSet masks = io::load_masks(masks_path.string() + ".masks.json");
    VoxelizedItem vox = voxelize_labeled(lc.cloud, masks, config.voxel_size);
    if (vox.masks.masks.empty()) continue;
    items.push_back({std::move(vox.cloud), std::move(vox.masks)});
  }
  if (items.empty()) throw ValidationError("pretrain: no usable lifted frames");
  return items;
}

}  // namespace

void pretrain(const cfg::PipelineConfig& config, const Logger& log) {
  const std::vector<train::TrainItem> items = load_stage1_items(config);
  log.info("pretrain_data", json{{"items", items.size()}}.dump());
  net::NetworkConfig model = config.model;
  net::NetworkParams params = net::NetworkParams::init(model, config.stage1.seed);
  run_training_stage(config, log, 1, params, items);
}

void pseudo_label(const cfg::PipelineConfig& config, const Logger& log) {
  const auto ckpt = config.output_root / "checkpoints" / "stage1.ckpt";
  if (!std::filesystem::exists(ckpt))
    throw MissingInputError("missing checkpoint " + ckpt.string() +
                            "; run `pcseg pretrain` first");
  const net::NetworkParams params = net::load_checkpoint(ckpt);
  const io::Provenance prov = provenance_of(config);

  std::size_t total_masks = 0;
  for (const auto& dir : scene_dirs_or_die(config, "train")) {
    const io::SceneRecord scene = io::load_scene(dir);
    geom::PointCloud cloud = scene.full_cloud;
    apply_coordinate_scale(cloud, config.coordinate_scale);
    const geom::DownsampleResult down = geom::voxel_downsample(cloud, config.voxel_size);
    const std::size_t q = std::min(config.query_count_infer, down.cloud.size());
    const net::Prediction pred = net::predict(params, down.cloud, q, config.infer_seed);
    mask::MaskSet selected = pseudo::select_masks(pred, config.tau_c);
    selected = pseudo::split_instances(selected, down.cloud, config.pseudo_dbscan_eps,
                                       config.pseudo_dbscan_min_pts,
                                       config.pseudo_dbscan_min_pts);
    total_masks += selected.masks.size();

    const auto out_dir = config.data_root / "pseudo" / scene.scene_id;
    const std::vector<int> labels = selected.to_labels();
    io::save_cloud(out_dir / "cloud.ply", down.cloud, &labels, {true, prov});
    io::save_masks(out_dir / "cloud.masks.json", selected, prov);
  }
  log.info("pseudo_label_done", json{{"selected_masks", total_masks}}.dump());
}

void finetune(const cfg::PipelineConfig& config, const Logger& log) {
  const auto ckpt = config.output_root / "checkpoints" / "stage1.ckpt";
  if (!std::filesystem::exists(ckpt))
    throw MissingInputError("missing checkpoint " + ckpt.string() +
                            "; run `pcseg pretrain` first");
  const auto pseudo_root = config.data_root / "pseudo";
  if (!std::filesystem::exists(pseudo_root))
    throw MissingInputError("missing pseudo labels at " + pseudo_root.string() +
                            "; run `pcseg pseudo-label` first");

  std::vector<std::filesystem::path> scene_dirs;
  for (const auto& d : std::filesystem::directory_iterator(pseudo_root))
    if (d.is_directory()) scene_dirs.push_back(d.path());
  std::sort(scene_dirs.begin(), scene_dirs.end());

  std::vector<train::TrainItem> items;
  std::size_t skipped = 0;
  for (const auto& dir : scene_dirs) {
    const io::LoadedCloud lc = io::load_cloud(dir / "cloud.ply");
    const mask::MaskSet masks = io::load_masks(dir / "cloud.masks.json");
    if (masks.masks.empty()) {
      ++skipped;  // zero-selection scenes are legal and simply not trained on
      continue;
    }
    items.push_back({lc.cloud, masks});
  }
  if (items.empty())
    throw ValidationError("finetune: every pseudo-labeled scene is empty; lower tau_c");
  log.info("finetune_data", json{{"items", items.size()}, {"skipped", skipped}}.dump());

  net::NetworkParams params = net::load_checkpoint(ckpt);
  run_training_stage(config, log, 2, params, items);
}

void infer(const cfg::PipelineConfig& config, const Logger& log,
           const std::filesystem::path& checkpoint, const std::string& split,
           const std::string& tag) {
  if (!std::filesystem::exists(checkpoint))
    throw MissingInputError("missing checkpoint " + checkpoint.string() +
                            "; run `pcseg pretrain`/`pcseg finetune` first");
  const net::NetworkParams params = net::load_checkpoint(checkpoint);
  const io::Provenance prov = provenance_of(config);
  for (const auto& dir : scene_dirs_or_die(config, split)) {
    const io::SceneRecord scene = io::load_scene(dir);
    geom::PointCloud cloud = scene.full_cloud;
    apply_coordinate_scale(cloud, config.coordinate_scale);
    const mask::MaskSet preds = predict_scene(params, cloud, config);
    write_predictions(config, tag, scene.scene_id, preds, prov);
  }
  log.info("infer_done", json{{"tag", tag}, {"split", split}}.dump());
}

void merge_sam3d(const cfg::PipelineConfig& config, const Logger& log,
                 const std::string& split, const std::string& tag) {
  const io::Provenance prov = provenance_of(config);
  sam3d::MergeParams params;
  params.theta_merge = config.merge_theta;
  params.radius = config.merge_radius_factor * config.voxel_size;

  for (const auto& dir : scene_dirs_or_die(config, split)) {
    const io::SceneRecord scene = io::load_scene(dir);
    std::vector<sam3d::PartialSegmentation> frames;
    for (const io::FrameBundle& bundle : scene.frames) {
      lift::LiftResult lifted = lift::lift_frame(bundle, config.min_mask_points);
      apply_coordinate_scale(lifted.cloud, config.coordinate_scale);
      if (lifted.masks.masks.empty()) continue;
      sam3d::PartialSegmentation seg;
      seg.cloud = std::move(lifted.cloud);
      seg.masks = std::move(lifted.masks);
      seg.source_frames = {bundle.frame_id};
      frames.push_back(std::move(seg));
    }
    mask::MaskSet preds;
    geom::PointCloud full = scene.full_cloud;
    apply_coordinate_scale(full, config.coordinate_scale);
    preds.point_count = full.size();
    if (!frames.empty()) {
      const sam3d::PartialSegmentation merged = sam3d::merge_sequence(frames, params);
      // transfer merged masks onto the scene cloud: each scene point takes
      // the mask memberships of its nearest merged point within the merge
      // radius
      const std::vector<double> packed = merged.cloud.packed_positions();
      std::vector<double> dist(merged.cloud.size());
      std::vector<std::int64_t> nearest(full.size(), -1);
      for (std::size_t i = 0; i < full.size(); ++i) {
        const double q[3] = {full.positions[i].x, full.positions[i].y, full.positions[i].z};
        kernels::sqdist(q, packed.data(), merged.cloud.size(), dist.data());
        std::size_t best = 0;
        for (std::size_t j = 1; j < merged.cloud.size(); ++j)
          if (dist[j] < dist[best]) best = j;
        if (dist[best] <= params.radius * params.radius)
          nearest[i] = static_cast<std::int64_t>(best);
      }
      for (const mask::Mask& m : merged.masks.masks) {
        mask::Mask out;
        out.id = m.id;
        out.score = m.score;
        out.membership.assign(full.size(), 0);
        for (std::size_t i = 0; i < full.size(); ++i)
          if (nearest[i] >= 0 && m.membership[static_cast<std::size_t>(nearest[i])])
            out.membership[i] = 1;
        if (out.member_count() > 0) preds.masks.push_back(std::move(out));
      }
    }
    write_predictions(config, tag, scene.scene_id, preds, prov);
  }
  log.info("merge_sam3d_done", json{{"tag", tag}, {"split", split}}.dump());
}

void postprocess_predictions(const cfg::PipelineConfig& config, const Logger& log,
                             const std::string& split, const std::string& in_tag,
                             const std::string& out_tag) {
  const io::Provenance prov = provenance_of(config);
  for (const auto& dir : scene_dirs_or_die(config, split)) {
    const io::SceneRecord scene = io::load_scene(dir);
    geom::PointCloud cloud = scene.full_cloud;
    apply_coordinate_scale(cloud, config.coordinate_scale);
    const mask::MaskSet in = read_predictions(config, in_tag, scene.scene_id);
    const mask::MaskSet out = post::postprocess(in, cloud, config.postprocess);
    write_predictions(config, out_tag, scene.scene_id, out, prov);
  }
  log.info("postprocess_done", json{{"in", in_tag}, {"out", out_tag}}.dump());
}

eval::EvalReport evaluate_predictions(const cfg::PipelineConfig& config, const Logger& log,
                                      const std::string& split, const std::string& tag) {
  std::vector<eval::ScenePair> pairs;
  for (const auto& dir : scene_dirs_or_die(config, split)) {
    const io::SceneRecord scene = io::load_scene(dir);
    if (scene.gt_masks.masks.empty())
      throw ValidationError("evaluate: scene " + scene.scene_id + " has no ground truth");
    pairs.push_back({read_predictions(config, tag, scene.scene_id), scene.gt_masks});
  }
  const eval::EvalReport report = eval::evaluate_scenes(pairs);
  log.info("eval_done", json{{"tag", tag},
                             {"split", split},
                             {"ap", report.ap},
                             {"ap50", report.ap50},
                             {"ap25", report.ap25}}.dump());
  return report;
}

void sweep_queries(const cfg::PipelineConfig& config, const Logger& log,
                   const std::filesystem::path& checkpoint, const std::string& split,
                   const std::vector<std::size_t>& query_counts,
                   const std::filesystem::path& out_path) {
  if (!std::filesystem::exists(checkpoint))
    throw MissingInputError("missing checkpoint " + checkpoint.string() +
                            "; run `pcseg pretrain`/`pcseg finetune` first");
  if (query_counts.empty()) throw ValidationError("sweep: need at least one query count");
  const net::NetworkParams params = net::load_checkpoint(checkpoint);

  struct Scene {
    geom::PointCloud cloud;
    geom::DownsampleResult down;
    mask::MaskSet gt;
  };
  std::vector<Scene> scenes;
  for (const auto& dir : scene_dirs_or_die(config, split)) {
    const io::SceneRecord record = io::load_scene(dir);
    Scene s;
    s.cloud = record.full_cloud;
    apply_coordinate_scale(s.cloud, config.coordinate_scale);
    s.down = geom::voxel_downsample(s.cloud, config.voxel_size);
    s.gt = record.gt_masks;
    scenes.push_back(std::move(s));
  }

  json rows = json::array();
  std::string csv = "q,ap,ap50,ap25\n";
  for (std::size_t q : query_counts) {
    std::vector<eval::ScenePair> pairs;
    for (const Scene& s : scenes) {
      const std::size_t q_eff = std::min(q, s.down.cloud.size());
      if (q_eff < q)
        log.info("sweep_query_clamped",
                 json{{"requested", q}, {"used", q_eff}}.dump());
      const net::Prediction pred = net::predict(params, s.down.cloud, q_eff, config.infer_seed);
      pairs.push_back(
          {broadcast_masks(pseudo::select_masks(pred, 0.0), s.down.point_to_voxel), s.gt});
    }
    const eval::EvalReport r = eval::evaluate_scenes(pairs);
    rows.push_back({{"q", q}, {"ap", r.ap}, {"ap50", r.ap50}, {"ap25", r.ap25}});
    char line[128];
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", q, r.ap, r.ap50, r.ap25);
    csv += line;
    log.info("sweep_row", rows.back().dump());
  }
  json doc;
  doc["provenance"] = {{"config_hash", cfg::config_hash(config)}, {"version", kVersion}};
  doc["rows"] = std::move(rows);
  std::filesystem::create_directories(out_path.parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : out_path.parent_path());
  std::ofstream out(out_path);
  out << doc.dump(2) << "\n";
  std::ofstream plot(out_path.string() + ".csv");
  plot << csv;
}

std::string pipeline(const cfg::PipelineConfig& config, const Logger& log) {
  synth(config, log);
  lift(config, log);
  pretrain(config, log);

  const auto stage1_ckpt = config.output_root / "checkpoints" / "stage1.ckpt";
  infer(config, log, stage1_ckpt, "eval", "stage1");

  pseudo_label(config, log);
  finetune(config, log);
  const auto stage2_ckpt = config.output_root / "checkpoints" / "stage2.ckpt";
  infer(config, log, stage2_ckpt, "eval", "stage2");

  merge_sam3d(config, log, "eval", "sam3d");

  json report;
  report["provenance"] = {{"config_hash", cfg::config_hash(config)}, {"version", kVersion}};
  const auto add_row = [&](const std::string& row, const std::string& tag) {
    const eval::EvalReport plain = evaluate_predictions(config, log, "eval", tag);
    json row_json;
    row_json["without_postprocess"] = json::parse(eval::report_json(plain));
    if (config.postprocess_enabled) {
      postprocess_predictions(config, log, "eval", tag, tag + "_post");
      const eval::EvalReport post = evaluate_predictions(config, log, "eval", tag + "_post");
      row_json["with_postprocess"] = json::parse(eval::report_json(post));
    }
    report["rows"][row] = std::move(row_json);
  };
  add_row("stage1", "stage1");
  add_row("stage1+2", "stage2");
  add_row("sam3d_merge", "sam3d");

  const std::string text = report.dump(2);
  std::filesystem::create_directories(config.output_root);
  std::ofstream out(config.output_root / "report.json");
  out << text << "\n";
  log.info("pipeline_done", json{{"report", (config.output_root / "report.json").string()}}.dump());
  return text;
}

}  // namespace pcseg::cmd
