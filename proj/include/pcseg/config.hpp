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

#include <filesystem>
#include <string>

#include "pcseg/network.hpp"
#include "pcseg/postprocess.hpp"
#include "pcseg/sam3d_merge.hpp"
#include "pcseg/synth.hpp"
#include "pcseg/training.hpp"

// Single versioned JSON config. Every tunable lives here; unknown keys are
// rejected; defaults are the reference-scale settings (2 cm voxels, 150
// training queries, 400 inference queries, loss weights 2/2/5).

namespace pcseg::cfg {

struct StageConfig {
  std::size_t steps = 300;
  std::size_t batch_size = 4;
  double peak_lr = 2e-4;
  double weight_decay = 0.01;
  std::uint64_t seed = 3;
};

struct PipelineConfig {
  // paths
  std::filesystem::path data_root = "data";
  std::filesystem::path output_root = "out";

  std::string kernel_backend = "auto";  // auto | scalar | avx2
  int workers = 2;
  double coordinate_scale = 1.0;  // divide input positions by this on load

  // synth
  synth::SynthSpec synth;
  int train_scenes = 4;
  int eval_scenes = 8;

  // geometry
  double voxel_size = 0.02;
  std::uint64_t fps_seed = 17;
  int fourier_bands = 6;

  // lifting
  std::size_t min_mask_points = 50;

  // model
  net::NetworkConfig model;

  // losses + schedule
  train::LossWeights loss_weights;
  double warmup_frac = 0.1;
  double warmup_start_frac = 0.01;
  double final_frac = 0.01;
  StageConfig stage1;
  StageConfig stage2;
  std::size_t query_count_train = 150;

  // pseudo labels
  double tau_c = 0.75;
  double pseudo_dbscan_eps = 0.05;
  std::size_t pseudo_dbscan_min_pts = 10;

  // sam3d-style merge baseline
  double merge_theta = 0.3;
  double merge_radius_factor = 2.0;  // radius = factor * voxel_size

  // postprocess
  bool postprocess_enabled = true;
  post::PostprocessParams postprocess;

  // inference
  std::size_t query_count_infer = 400;
  std::uint64_t infer_seed = 9;

  void validate() const;
};

/// Parses and validates; unknown keys and out-of-range values throw
/// ValidationError naming the offender. Absent keys take defaults.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text, const std::string& origin);

/// Canonical JSON (defaults filled, keys sorted).
std::string canonical_json(const PipelineConfig& config);
/// FNV-1a hash of the canonical form; stamped into every artifact.
std::string config_hash(const PipelineConfig& config);

}  // namespace pcseg::cfg
