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

#include "pcseg/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace pcseg::cfg {

using nlohmann::json;

namespace {

/// Wraps one JSON object level: typed reads with defaults, unknown-key
/// rejection on destruction-free finish().
class Strict {
 public:
  Strict(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(path_ + "." + key + ": " + e.what());
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw ValidationError(path_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 vec3_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3)
    throw ValidationError(path + ": expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void PipelineConfig::validate() const {
  if (kernel_backend != "auto" && kernel_backend != "scalar" && kernel_backend != "avx2")
    throw ValidationError("config: kernel_backend must be auto|scalar|avx2");
  if (workers < 1) throw ValidationError("config: workers must be >= 1");
  if (!(coordinate_scale > 0)) throw ValidationError("config: coordinate_scale must be > 0");
  if (!(voxel_size > 0)) throw ValidationError("config: voxel_size must be > 0");
  if (fourier_bands < 1) throw ValidationError("config: fourier_bands must be >= 1");
  if (train_scenes < 1 || eval_scenes < 1)
    throw ValidationError("config: scene counts must be >= 1");
  if (min_mask_points < 1) throw ValidationError("config: min_mask_points must be >= 1");
  if (tau_c < 0 || tau_c > 1) throw ValidationError("config: tau_c must be in [0,1]");
  if (!(pseudo_dbscan_eps > 0)) throw ValidationError("config: dbscan eps must be > 0");
  if (!(merge_theta > 0) || merge_theta > 1)
    throw ValidationError("config: merge theta must be in (0,1]");
  if (!(merge_radius_factor > 0))
    throw ValidationError("config: merge radius factor must be > 0");
  if (query_count_train < 1 || query_count_infer < 1)
    throw ValidationError("config: query counts must be >= 1");
  if (stage1.steps < 1 || stage2.steps < 1 || stage1.batch_size < 1 || stage2.batch_size < 1)
    throw ValidationError("config: stage steps and batch sizes must be >= 1");
  if (!(stage1.peak_lr > 0) || !(stage2.peak_lr > 0))
    throw ValidationError("config: learning rates must be > 0");
  if (warmup_frac < 0 || warmup_frac >= 1)
    throw ValidationError("config: warmup_frac must be in [0,1)");
  synth.validate();
  model.validate();
  loss_weights.validate();
  if (!(postprocess.felz.fz_k > 0)) throw ValidationError("config: fz_k must be > 0");
  if (!(postprocess.dbscan_eps > 0))
    throw ValidationError("config: postprocess dbscan eps must be > 0");
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
  PipelineConfig c;
  Strict root(doc, origin);
  const int version = root.get<int>("schema_version", 1);
  if (version != 1) throw ValidationError(origin + ": unsupported schema_version");

  if (root.has("paths")) {
    Strict paths(root.raw("paths"), origin + ".paths");
    c.data_root = paths.get<std::string>("data_root", c.data_root.string());
    c.output_root = paths.get<std::string>("output_root", c.output_root.string());
    paths.finish();
  }
  c.kernel_backend = root.get<std::string>("kernel_backend", c.kernel_backend);
  c.workers = root.get<int>("workers", c.workers);
  c.coordinate_scale = root.get<double>("coordinate_scale", c.coordinate_scale);

  if (root.has("synth")) {
    Strict s(root.raw("synth"), origin + ".synth");
    c.synth.seed = s.get<std::uint64_t>("seed", c.synth.seed);
    c.train_scenes = s.get<int>("train_scenes", c.train_scenes);
    c.eval_scenes = s.get<int>("eval_scenes", c.eval_scenes);
    c.synth.object_count_min = s.get<int>("object_count_min", c.synth.object_count_min);
    c.synth.object_count_max = s.get<int>("object_count_max", c.synth.object_count_max);
    if (s.has("room_extent_min"))
      c.synth.room_extent_min = vec3_of(s.raw("room_extent_min"), origin + ".synth.room_extent_min");
    if (s.has("room_extent_max"))
      c.synth.room_extent_max = vec3_of(s.raw("room_extent_max"), origin + ".synth.room_extent_max");
    c.synth.points_per_object_min =
        s.get<int>("points_per_object_min", c.synth.points_per_object_min);
    c.synth.points_per_object_max =
        s.get<int>("points_per_object_max", c.synth.points_per_object_max);
    c.synth.shell_points = s.get<int>("shell_points", c.synth.shell_points);
    c.synth.frames_per_scene = s.get<int>("frames_per_scene", c.synth.frames_per_scene);
    c.synth.masks_per_frame_target =
        s.get<int>("masks_per_frame_target", c.synth.masks_per_frame_target);
    c.synth.image_width = s.get<int>("image_width", c.synth.image_width);
    c.synth.image_height = s.get<int>("image_height", c.synth.image_height);
    c.synth.perturb = s.get<bool>("perturb", c.synth.perturb);
    c.synth.erode_prob = s.get<double>("erode_prob", c.synth.erode_prob);
    c.synth.split_prob = s.get<double>("split_prob", c.synth.split_prob);
    s.finish();
  }
  if (root.has("geometry")) {
    Strict g(root.raw("geometry"), origin + ".geometry");
    c.voxel_size = g.get<double>("voxel_size", c.voxel_size);
    c.fps_seed = g.get<std::uint64_t>("fps_seed", c.fps_seed);
    c.fourier_bands = g.get<int>("fourier_bands", c.fourier_bands);
    g.finish();
  }
  if (root.has("lifting")) {
    Strict l(root.raw("lifting"), origin + ".lifting");
    c.min_mask_points = l.get<std::size_t>("min_mask_points", c.min_mask_points);
    l.finish();
  }
  if (root.has("model")) {
    Strict m(root.raw("model"), origin + ".model");
    c.model.feature_dim = m.get<int>("feature_dim", c.model.feature_dim);
    c.model.levels = m.get<int>("levels", c.model.levels);
    c.model.decoder_layers = m.get<int>("decoder_layers", c.model.decoder_layers);
    c.model.ffn_hidden = m.get<int>("ffn_hidden", c.model.ffn_hidden);
    c.model.backbone_base_voxel =
        m.get<double>("backbone_base_voxel", c.model.backbone_base_voxel);
    c.model.masked_attention = m.get<bool>("masked_attention", c.model.masked_attention);
    m.finish();
  }
  c.model.fourier_bands = c.fourier_bands;

  if (root.has("loss")) {
    Strict l(root.raw("loss"), origin + ".loss");
    c.loss_weights.lambda_obj = l.get<double>("lambda_obj", c.loss_weights.lambda_obj);
    c.loss_weights.lambda_dice = l.get<double>("lambda_dice", c.loss_weights.lambda_dice);
    c.loss_weights.lambda_ce = l.get<double>("lambda_ce", c.loss_weights.lambda_ce);
    l.finish();
  }
  if (root.has("training")) {
    Strict t(root.raw("training"), origin + ".training");
    c.warmup_frac = t.get<double>("warmup_frac", c.warmup_frac);
    c.warmup_start_frac = t.get<double>("warmup_start_frac", c.warmup_start_frac);
    c.final_frac = t.get<double>("final_frac", c.final_frac);
    c.query_count_train = t.get<std::size_t>("query_count_train", c.query_count_train);
    const auto stage = [&](const char* key, StageConfig& out) {
      if (!t.has(key)) return;
      Strict s(t.raw(key), origin + ".training." + key);
      out.steps = s.get<std::size_t>("steps", out.steps);
      out.batch_size = s.get<std::size_t>("batch_size", out.batch_size);
      out.peak_lr = s.get<double>("peak_lr", out.peak_lr);
      out.weight_decay = s.get<double>("weight_decay", out.weight_decay);
      out.seed = s.get<std::uint64_t>("seed", out.seed);
      s.finish();
    };
    stage("stage1", c.stage1);
    stage("stage2", c.stage2);
    t.finish();
  }
  if (root.has("pseudo_labels")) {
    Strict p(root.raw("pseudo_labels"), origin + ".pseudo_labels");
    c.tau_c = p.get<double>("tau_c", c.tau_c);
    c.pseudo_dbscan_eps = p.get<double>("dbscan_eps", c.pseudo_dbscan_eps);
    c.pseudo_dbscan_min_pts = p.get<std::size_t>("dbscan_min_pts", c.pseudo_dbscan_min_pts);
    p.finish();
  }
  if (root.has("merge")) {
    Strict m(root.raw("merge"), origin + ".merge");
    c.merge_theta = m.get<double>("theta", c.merge_theta);
    c.merge_radius_factor = m.get<double>("radius_factor", c.merge_radius_factor);
    m.finish();
  }
  if (root.has("postprocess")) {
    Strict p(root.raw("postprocess"), origin + ".postprocess");
    c.postprocess_enabled = p.get<bool>("enabled", c.postprocess_enabled);
    c.postprocess.felz.k_nn = p.get<std::size_t>("knn", c.postprocess.felz.k_nn);
    c.postprocess.felz.fz_k = p.get<double>("fz_k", c.postprocess.felz.fz_k);
    c.postprocess.felz.min_segment =
        p.get<std::size_t>("min_segment", c.postprocess.felz.min_segment);
    c.postprocess.dbscan_eps = p.get<double>("dbscan_eps", c.postprocess.dbscan_eps);
    c.postprocess.dbscan_min_pts =
        p.get<std::size_t>("dbscan_min_pts", c.postprocess.dbscan_min_pts);
    c.postprocess.min_mask_points =
        p.get<std::size_t>("min_mask_points", c.postprocess.min_mask_points);
    p.finish();
  }
  if (root.has("inference")) {
    Strict i(root.raw("inference"), origin + ".inference");
    c.query_count_infer = i.get<std::size_t>("query_count", c.query_count_infer);
    c.infer_seed = i.get<std::uint64_t>("seed", c.infer_seed);
    i.finish();
  }
  root.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("missing config file: " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return parse_config(text, path.string());
}

std::string canonical_json(const PipelineConfig& c) {
  json doc;
  doc["schema_version"] = 1;
  doc["paths"] = {{"data_root", c.data_root.string()},
                  {"output_root", c.output_root.string()}};
  doc["kernel_backend"] = c.kernel_backend;
  doc["workers"] = c.workers;
  doc["coordinate_scale"] = c.coordinate_scale;
  doc["synth"] = {{"seed", c.synth.seed},
                  {"train_scenes", c.train_scenes},
                  {"eval_scenes", c.eval_scenes},
                  {"object_count_min", c.synth.object_count_min},
                  {"object_count_max", c.synth.object_count_max},
                  {"room_extent_min",
                   {c.synth.room_extent_min.x, c.synth.room_extent_min.y,
                    c.synth.room_extent_min.z}},
                  {"room_extent_max",
                   {c.synth.room_extent_max.x, c.synth.room_extent_max.y,
                    c.synth.room_extent_max.z}},
                  {"points_per_object_min", c.synth.points_per_object_min},
                  {"points_per_object_max", c.synth.points_per_object_max},
                  {"shell_points", c.synth.shell_points},
                  {"frames_per_scene", c.synth.frames_per_scene},
                  {"masks_per_frame_target", c.synth.masks_per_frame_target},
                  {"image_width", c.synth.image_width},
                  {"image_height", c.synth.image_height},
                  {"perturb", c.synth.perturb},
                  {"erode_prob", c.synth.erode_prob},
                  {"split_prob", c.synth.split_prob}};
  doc["geometry"] = {{"voxel_size", c.voxel_size},
                     {"fps_seed", c.fps_seed},
                     {"fourier_bands", c.fourier_bands}};
  doc["lifting"] = {{"min_mask_points", c.min_mask_points}};
  doc["model"] = {{"feature_dim", c.model.feature_dim},
                  {"levels", c.model.levels},
                  {"decoder_layers", c.model.decoder_layers},
                  {"ffn_hidden", c.model.ffn_hidden},
                  {"backbone_base_voxel", c.model.backbone_base_voxel},
                  {"masked_attention", c.model.masked_attention}};
  doc["loss"] = {{"lambda_obj", c.loss_weights.lambda_obj},
                 {"lambda_dice", c.loss_weights.lambda_dice},
                 {"lambda_ce", c.loss_weights.lambda_ce}};
  doc["training"] = {{"warmup_frac", c.warmup_frac},
                     {"warmup_start_frac", c.warmup_start_frac},
                     {"final_frac", c.final_frac},
                     {"query_count_train", c.query_count_train},
                     {"stage1",
                      {{"steps", c.stage1.steps},
                       {"batch_size", c.stage1.batch_size},
                       {"peak_lr", c.stage1.peak_lr},
                       {"weight_decay", c.stage1.weight_decay},
                       {"seed", c.stage1.seed}}},
                     {"stage2",
                      {{"steps", c.stage2.steps},
                       {"batch_size", c.stage2.batch_size},
                       {"peak_lr", c.stage2.peak_lr},
                       {"weight_decay", c.stage2.weight_decay},
                       {"seed", c.stage2.seed}}}};
  doc["pseudo_labels"] = {{"tau_c", c.tau_c},
                          {"dbscan_eps", c.pseudo_dbscan_eps},
                          {"dbscan_min_pts", c.pseudo_dbscan_min_pts}};
  doc["merge"] = {{"theta", c.merge_theta}, {"radius_factor", c.merge_radius_factor}};
  doc["postprocess"] = {{"enabled", c.postprocess_enabled},
                        {"knn", c.postprocess.felz.k_nn},
                        {"fz_k", c.postprocess.felz.fz_k},
                        {"min_segment", c.postprocess.felz.min_segment},
                        {"dbscan_eps", c.postprocess.dbscan_eps},
                        {"dbscan_min_pts", c.postprocess.dbscan_min_pts},
                        {"min_mask_points", c.postprocess.min_mask_points}};
  doc["inference"] = {{"query_count", c.query_count_infer}, {"seed", c.infer_seed}};
  return doc.dump(2);
}

std::string config_hash(const PipelineConfig& c) {
  return to_hex(fnv1a64(canonical_json(c)));
}

}  // namespace pcseg::cfg
