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

#include <iosfwd>

#include "pcseg/config.hpp"
#include "pcseg/evaluation.hpp"

// Command bodies behind the CLI. Each is idempotent given identical inputs
// and seeds; outputs are stamped with the config hash. Missing inputs raise
// MissingInputError naming the artifact and the command that produces it.
//
// Artifact layout:
//   <data_root>/scenes/{train,eval}/scene_NNNN/...   (synth)
//   <data_root>/lifted/<scene>/<frame>.{ply,masks.json}   (lift)
//   <data_root>/pseudo/<scene>/cloud.{ply,masks.json}     (pseudo-label)
//   <out_root>/checkpoints/stage{1,2}.ckpt[.optim]        (pretrain/finetune)
//   <out_root>/logs/stage{1,2}_metrics.jsonl
//   <out_root>/predictions/<tag>/<scene>.masks.json        (infer/merge/postprocess)
//   <out_root>/report.json                                 (pipeline)

namespace pcseg::cmd {

/// Line-delimited JSON logging on an ostream (the CLI passes stderr).
class Logger {
 public:
  explicit Logger(std::ostream* sink) : sink_(sink) {}
  void info(const std::string& event, const std::string& detail_json = "{}") const;

 private:
  std::ostream* sink_;
};

void synth(const cfg::PipelineConfig& config, const Logger& log);
void lift(const cfg::PipelineConfig& config, const Logger& log);
void pretrain(const cfg::PipelineConfig& config, const Logger& log);
void pseudo_label(const cfg::PipelineConfig& config, const Logger& log);
void finetune(const cfg::PipelineConfig& config, const Logger& log);

/// Runs a checkpoint over one scene split and writes per-scene predictions
/// under predictions/<tag>/.
void infer(const cfg::PipelineConfig& config, const Logger& log,
           const std::filesystem::path& checkpoint, const std::string& split,
           const std::string& tag);

/// SAM3D-style baseline over a split; writes predictions/<tag>/.
void merge_sam3d(const cfg::PipelineConfig& config, const Logger& log,
                 const std::string& split, const std::string& tag);

/// Applies oversegmentation smoothing + DBSCAN splitting to an existing
/// prediction set, writing predictions/<out_tag>/.
void postprocess_predictions(const cfg::PipelineConfig& config, const Logger& log,
                             const std::string& split, const std::string& in_tag,
                             const std::string& out_tag);

/// Evaluates predictions/<tag> against a split's ground truth.
eval::EvalReport evaluate_predictions(const cfg::PipelineConfig& config, const Logger& log,
                                      const std::string& split, const std::string& tag);

/// Query-count sweep over a split; writes a JSON table and a CSV plot file.
void sweep_queries(const cfg::PipelineConfig& config, const Logger& log,
                   const std::filesystem::path& checkpoint, const std::string& split,
                   const std::vector<std::size_t>& query_counts,
                   const std::filesystem::path& out_path);

/// synth -> lift -> pretrain -> pseudo-label -> finetune -> baseline ->
/// evaluation of all three rows with and without post-processing. Returns
/// the report JSON text (also written to <out_root>/report.json).
std::string pipeline(const cfg::PipelineConfig& config, const Logger& log);

}  // namespace pcseg::cmd
