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

#include <functional>
#include <span>

#include "pcseg/masks.hpp"
#include "pcseg/network.hpp"

namespace pcseg::train {

/// Loss balance; defaults follow the reference setting (obj 2, dice 2, ce 5).
struct LossWeights {
  double lambda_obj = 2.0;
  double lambda_dice = 2.0;
  double lambda_ce = 5.0;

  void validate() const;
};

// -- scalar loss terms (shared by matching, evaluation and tests) --------------

/// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps)
double dice_loss(std::span<const double> probs, std::span<const double> target,
                 double eps = 1.0);
/// Mean binary cross-entropy computed from logits (stable at large |h|).
double bce_loss(std::span<const double> logits, std::span<const double> target);
/// Mean 2-way cross-entropy; labels index the true class per row.
double objectness_loss(const ad::Tensor& logits, const std::vector<int>& labels);
/// Softmax probability of the object class (index 0) from a 2-logit row.
double object_probability(double object_logit, double no_object_logit);

// -- assignment ------------------------------------------------------------------

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (query, target), by query
  std::vector<std::size_t> unmatched_queries;
  double total_cost = 0;
};

/// Exact min-cost assignment of min(rows, cols) pairs on a dense rows x cols
/// matrix (shortest augmenting path with potentials).
MatchResult hungarian(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

/// Matching cost: lambda_dice * dice + lambda_ce * bce - lambda_obj * log p(object).
std::vector<double> matching_costs(const net::Prediction& pred, const mask::MaskSet& targets,
                                   const LossWeights& w);
MatchResult match_masks(const net::Prediction& pred, const mask::MaskSet& targets,
                        const LossWeights& w);

// -- composed losses -----------------------------------------------------------------

struct LossBreakdown {
  double total = 0;
  double dice = 0;        // mean over matched pairs
  double bce = 0;         // mean over matched pairs
  double objectness = 0;  // mean over all queries (stage 1 only)
  std::size_t matched = 0;
};

/// Stage 1: L = L_mask + lambda_obj * L_obj, with L_mask averaged over
/// matched pairs and L_obj over all queries. Zero targets degenerate to the
/// objectness term with every query labeled no-object.
LossBreakdown loss_stage1(const net::Prediction& pred, const mask::MaskSet& targets,
                          const LossWeights& w);

/// Stage 2: L_mask over matched pairs only; no objectness term; zero targets
/// define zero loss (callers skip such batches).
LossBreakdown loss_stage2(const net::Prediction& pred, const mask::MaskSet& targets,
                          const LossWeights& w);

/// Differentiable versions built on a ForwardPass; numerically equal to the
/// scalar forms above on the same inputs.
ad::Val loss_stage1_graph(ad::Graph& g, const net::ForwardPass& fp, const mask::MaskSet& targets,
                          const LossWeights& w, MatchResult* match_out = nullptr);
ad::Val loss_stage2_graph(ad::Graph& g, const net::ForwardPass& fp, const mask::MaskSet& targets,
                          const LossWeights& w, MatchResult* match_out = nullptr);

// -- optimizer ------------------------------------------------------------------------

/// One-cycle: linear warmup over warmup_frac of the steps starting at
/// peak * warmup_start_frac, then cosine decay to peak * final_frac.
struct ScheduleSpec {
  double peak_lr = 2e-4;
  double warmup_frac = 0.1;
  double warmup_start_frac = 0.01;
  double final_frac = 0.01;
  std::size_t total_steps = 1;
};
double schedule_lr(const ScheduleSpec& spec, std::size_t step);

struct OptimState {
  std::map<std::string, ad::Tensor> m;  // first moments, keyed like params
  std::map<std::string, ad::Tensor> v;  // second moments
  std::size_t step = 0;
  ScheduleSpec schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t skipped_updates = 0;  // non-finite gradient batches

  static OptimState init(const net::NetworkParams& params, const ScheduleSpec& schedule,
                         double weight_decay);
};

/// AdamW with decoupled weight decay. A non-finite gradient skips the update
/// (moments and params untouched) but still advances the step counter so the
/// schedule stays a pure function of it.
void optimizer_step(net::NetworkParams& params, const std::map<std::string, ad::Tensor>& grads,
                    OptimState& state);

// -- training driver --------------------------------------------------------------------

struct TrainItem {
  geom::PointCloud cloud;
  mask::MaskSet targets;
};

struct TrainConfig {
  int stage = 1;  // 1 or 2
  std::size_t steps = 300;
  std::size_t batch_size = 4;
  std::size_t query_count = 24;
  LossWeights weights;
  ScheduleSpec schedule;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

struct StepLog {
  std::size_t step = 0;
  double lr = 0;
  LossBreakdown loss;
  std::size_t batch_items = 0;  // items contributing a loss this step
};

using StepCallback = std::function<void(const StepLog&)>;

/// Runs the loop in place; deterministic in (params, data order, config).
/// Stage 2 items with zero targets contribute nothing; a step whose whole
/// batch is empty is skipped (counter still advances).
void train(net::NetworkParams& params, OptimState& state, const std::vector<TrainItem>& data,
           const TrainConfig& cfg, const StepCallback& on_step = nullptr);

/// Optimizer-state sidecar next to a parameter checkpoint, so interrupted
/// runs resume bit-identically.
void save_optim_state(const std::filesystem::path& path, const OptimState& state);
OptimState load_optim_state(const std::filesystem::path& path, const net::NetworkParams& params);

}  // namespace pcseg::train
