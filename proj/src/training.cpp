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

#include "pcseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "pcseg/kernels.hpp"

namespace pcseg::train {

using ad::Graph;
using ad::Tensor;
using ad::Val;
using nlohmann::json;

void LossWeights::validate() const {
  if (lambda_obj < 0 || lambda_dice < 0 || lambda_ce < 0)
    throw ValidationError("loss weights must be non-negative");
}

double dice_loss(std::span<const double> probs, std::span<const double> target, double eps) {
  if (probs.size() != target.size()) throw ValidationError("dice: length mismatch");
  double inter = 0, psum = 0, tsum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    inter += probs[i] * target[i];
    psum += probs[i];
    tsum += target[i];
  }
  return 1.0 - (2 * inter + eps) / (psum + tsum + eps);
}

double bce_loss(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) throw ValidationError("bce: length mismatch");
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    total += std::max(x, 0.0) - x * target[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return total / logits.size();
}

double objectness_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rows() != labels.size() || logits.cols() != 2)
    throw ValidationError("objectness: bad shapes");
  double total = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const double a = logits.at(r, 0), b = logits.at(r, 1);
    const double mx = std::max(a, b);
    const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
    total += lse - logits.at(r, static_cast<std::size_t>(labels[r]));
  }
  return total / labels.size();
}

double object_probability(double object_logit, double no_object_logit) {
  const double mx = std::max(object_logit, no_object_logit);
  const double ea = std::exp(object_logit - mx);
  const double eb = std::exp(no_object_logit - mx);
  return ea / (ea + eb);
}

MatchResult hungarian(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ValidationError("hungarian: empty cost matrix");
  if (cost.size() != rows * cols) throw ValidationError("hungarian: cost size mismatch");

  // Orient so n <= m; the algorithm assigns every one of the n smaller-side
  // entries to a distinct larger-side entry at minimum total cost.
  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows;
  const std::size_t m = transposed ? rows : cols;
  const auto at = [&](std::size_t i, std::size_t j) {
    return transposed ? cost[j * cols + i] : cost[i * cols + j];
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0 (shortest augmenting path with potentials)
  std::vector<double> u(n + 1, 0), v(m + 1, 0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      std::size_t j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  MatchResult result;
  std::vector<char> row_matched(rows, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const std::size_t small_idx = p[j] - 1;  // in [0,n)
    const std::size_t large_idx = j - 1;     // in [0,m)
    const std::size_t r = transposed ? large_idx : small_idx;
    const std::size_t c = transposed ? small_idx : large_idx;
    result.pairs.emplace_back(r, c);
    row_matched[r] = 1;
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (const auto& [r, c] : result.pairs) result.total_cost += cost[r * cols + c];
  for (std::size_t r = 0; r < rows; ++r)
    if (!row_matched[r]) result.unmatched_queries.push_back(r);
  return result;
}

std::vector<double> matching_costs(const net::Prediction& pred, const mask::MaskSet& targets,
                                   const LossWeights& w) {
  w.validate();
  const std::size_t q = pred.heatmaps.rows();
  const std::size_t n = pred.heatmaps.cols();
  const std::size_t m = targets.masks.size();
  if (targets.point_count != n)
    throw ValidationError("matching: target point count does not match heatmap width");

  std::vector<std::vector<double>> target_vecs(m);
  for (std::size_t t = 0; t < m; ++t)
    target_vecs[t].assign(targets.masks[t].membership.begin(),
                          targets.masks[t].membership.end());

  std::vector<double> probs(n);
  std::vector<double> cost(q * m);
  for (std::size_t i = 0; i < q; ++i) {
    const double* h = pred.heatmaps.data.data() + i * n;
    kernels::sigmoid(h, probs.data(), n);
    const double obj_p = object_probability(pred.objectness.at(i, 0), pred.objectness.at(i, 1));
    // stable -log p(object) straight from the logits
    const double neg_log_obj = -std::log(std::max(obj_p, 1e-300));
    for (std::size_t t = 0; t < m; ++t) {
      cost[i * m + t] = w.lambda_dice * dice_loss(probs, target_vecs[t]) +
                        w.lambda_ce * bce_loss({h, n}, target_vecs[t]) +
                        w.lambda_obj * neg_log_obj;
    }
  }
  return cost;
}

MatchResult match_masks(const net::Prediction& pred, const mask::MaskSet& targets,
                        const LossWeights& w) {
  if (targets.masks.empty()) throw ValidationError("matching: need at least one target");
  return hungarian(matching_costs(pred, targets, w), pred.heatmaps.rows(),
                   targets.masks.size());
}

namespace {

LossBreakdown mask_terms(const net::Prediction& pred, const mask::MaskSet& targets,
                         const MatchResult& match) {
  LossBreakdown out;
  const std::size_t n = pred.heatmaps.cols();
  std::vector<double> probs(n);
  for (const auto& [qi, ti] : match.pairs) {
    const double* h = pred.heatmaps.data.data() + qi * n;
    kernels::sigmoid(h, probs.data(), n);
    std::vector<double> target(targets.masks[ti].membership.begin(),
                               targets.masks[ti].membership.end());
    out.dice += dice_loss(probs, target);
    out.bce += bce_loss({h, n}, target);
  }
  out.matched = match.pairs.size();
  if (out.matched > 0) {
    out.dice /= out.matched;
    out.bce /= out.matched;
  }
  return out;
}

std::vector<int> objectness_labels(std::size_t query_count, const MatchResult& match) {
  std::vector<int> labels(query_count, 1);  // 1 = no-object
  for (const auto& [qi, ti] : match.pairs) labels[qi] = 0;
  return labels;
}

}  // namespace

LossBreakdown loss_stage1(const net::Prediction& pred, const mask::MaskSet& targets,
                          const LossWeights& w) {
  w.validate();
  const std::size_t q = pred.heatmaps.rows();
  if (targets.masks.empty()) {
    LossBreakdown out;
    out.objectness = objectness_loss(pred.objectness, std::vector<int>(q, 1));
    out.total = w.lambda_obj * out.objectness;
    return out;
  }
  const MatchResult match = match_masks(pred, targets, w);
  LossBreakdown out = mask_terms(pred, targets, match);
  out.objectness = objectness_loss(pred.objectness, objectness_labels(q, match));
  out.total = w.lambda_dice * out.dice + w.lambda_ce * out.bce + w.lambda_obj * out.objectness;
  return out;
}

LossBreakdown loss_stage2(const net::Prediction& pred, const mask::MaskSet& targets,
                          const LossWeights& w) {
  w.validate();
  LossBreakdown out;
  if (targets.masks.empty()) return out;  // defined as zero loss; batch skipped
  const MatchResult match = match_masks(pred, targets, w);
  out = mask_terms(pred, targets, match);
  out.total = w.lambda_dice * out.dice + w.lambda_ce * out.bce;
  return out;
}

namespace {

net::Prediction prediction_view(ad::Graph& g, const net::ForwardPass& fp) {
  net::Prediction pred;
  pred.heatmaps = g.value(fp.heatmaps);
  pred.objectness = g.value(fp.objectness);
  pred.query_positions = fp.query_positions;
  return pred;
}

Val mask_loss_graph(Graph& g, const net::ForwardPass& fp, const mask::MaskSet& targets,
                    const LossWeights& w, const MatchResult& match) {
  Val total{};
  bool first = true;
  for (const auto& [qi, ti] : match.pairs) {
    Val row = g.gather_rows(fp.heatmaps, {qi});
    std::vector<double> target(targets.masks[ti].membership.begin(),
                               targets.masks[ti].membership.end());
    Val dice = g.dice_loss(g.sigmoid(row), target, 1.0);
    Val bce = g.bce_with_logits(row, target);
    Val pair = g.add(g.scale(dice, w.lambda_dice), g.scale(bce, w.lambda_ce));
    total = first ? pair : g.add(total, pair);
    first = false;
  }
  return g.scale(total, 1.0 / match.pairs.size());
}

}  // namespace

Val loss_stage1_graph(Graph& g, const net::ForwardPass& fp, const mask::MaskSet& targets,
                      const LossWeights& w, MatchResult* match_out) {
  w.validate();
  const std::size_t q = g.value(fp.heatmaps).rows();
  if (targets.masks.empty()) {
    if (match_out) *match_out = {};
    return g.scale(g.cross_entropy_rows(fp.objectness, std::vector<int>(q, 1)), w.lambda_obj);
  }
  const MatchResult match = match_masks(prediction_view(g, fp), targets, w);
  if (match_out) *match_out = match;
  Val mask_loss = mask_loss_graph(g, fp, targets, w, match);
  Val obj = g.cross_entropy_rows(fp.objectness, objectness_labels(q, match));
  return g.add(mask_loss, g.scale(obj, w.lambda_obj));
}

Val loss_stage2_graph(Graph& g, const net::ForwardPass& fp, const mask::MaskSet& targets,
                      const LossWeights& w, MatchResult* match_out) {
  w.validate();
  if (targets.masks.empty())
    throw ValidationError("loss_stage2_graph: zero targets must be skipped by the caller");
  const MatchResult match = match_masks(prediction_view(g, fp), targets, w);
  if (match_out) *match_out = match;
  return mask_loss_graph(g, fp, targets, w, match);
}

// -- optimizer -----------------------------------------------------------------------

double schedule_lr(const ScheduleSpec& spec, std::size_t step) {
  if (spec.total_steps == 0) throw ValidationError("schedule: total_steps must be > 0");
  const double warmup_steps = std::round(spec.warmup_frac * spec.total_steps);
  if (step < warmup_steps) {
    const double t = step / warmup_steps;
    return spec.peak_lr * (spec.warmup_start_frac + (1.0 - spec.warmup_start_frac) * t);
  }
  const double decay_total = std::max(1.0, spec.total_steps - warmup_steps);
  const double t = std::min(1.0, (step - warmup_steps) / decay_total);
  const double floor_lr = spec.peak_lr * spec.final_frac;
  return floor_lr + (spec.peak_lr - floor_lr) * 0.5 * (1.0 + std::cos(M_PI * t));
}

OptimState OptimState::init(const net::NetworkParams& params, const ScheduleSpec& schedule,
                            double weight_decay) {
  OptimState s;
  s.schedule = schedule;
  s.weight_decay = weight_decay;
  for (const auto& [name, tensor] : params.tensors) {
    s.m.emplace(name, Tensor(tensor.shape));
    s.v.emplace(name, Tensor(tensor.shape));
  }
  return s;
}

void optimizer_step(net::NetworkParams& params, const std::map<std::string, Tensor>& grads,
                    OptimState& state) {
  bool finite = true;
  for (const auto& [name, g] : grads) {
    for (double x : g.data) {
      if (!std::isfinite(x)) {
        finite = false;
        break;
      }
    }
    if (!finite) break;
  }
  const double lr = schedule_lr(state.schedule, state.step);
  ++state.step;
  if (!finite) {
    ++state.skipped_updates;
    return;
  }

  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params.tensors) {
    const auto git = grads.find(name);
    if (git == grads.end()) throw ValidationError("optimizer: missing gradient for " + name);
    const Tensor& g = git->second;
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = state.beta1 * m.data[i] + (1 - state.beta1) * g.data[i];
      v.data[i] = state.beta2 * v.data[i] + (1 - state.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr * (mhat / (std::sqrt(vhat) + state.eps) +
                         state.weight_decay * p.data[i]);
    }
  }
}

// -- training loop ----------------------------------------------------------------------

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ValidationError("train: stage must be 1 or 2");
  if (steps == 0 || batch_size == 0 || query_count == 0)
    throw ValidationError("train: steps, batch size and query count must be positive");
  if (workers < 1) throw ValidationError("train: need at least one worker");
  weights.validate();
}

namespace {

struct ItemGrads {
  bool active = false;
  LossBreakdown loss;
  std::map<std::string, Tensor> grads;
};

ItemGrads run_item(const net::NetworkParams& params, const TrainItem& item,
                   const TrainConfig& cfg, std::uint64_t query_seed) {
  ItemGrads out;
  if (cfg.stage == 2 && item.targets.masks.empty()) return out;
  const std::size_t q = std::min(cfg.query_count, item.cloud.size());

  Graph g;
  const net::ForwardPass fp = net::network_forward(g, params, item.cloud, q, query_seed);
  MatchResult match;
  Val loss = cfg.stage == 1 ? loss_stage1_graph(g, fp, item.targets, cfg.weights, &match)
                            : loss_stage2_graph(g, fp, item.targets, cfg.weights, &match);
  g.backward(loss);

  const net::Prediction pred = prediction_view(g, fp);
  out.loss = cfg.stage == 1 ? loss_stage1(pred, item.targets, cfg.weights)
                            : loss_stage2(pred, item.targets, cfg.weights);
  for (const auto& [name, leaf] : fp.params) out.grads.emplace(name, g.grad(leaf));
  out.active = true;
  return out;
}

}  // namespace

void train(net::NetworkParams& params, OptimState& state, const std::vector<TrainItem>& data,
           const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: empty dataset");

  // The item for global draw g is a pure function of (seed, g): epoch g/n
  // gets its own seeded Fisher-Yates order. Keyed off the optimizer's step
  // counter so a resumed run replays the identical sequence.
  std::vector<std::size_t> order(data.size());
  std::size_t cached_epoch = std::numeric_limits<std::size_t>::max();
  const auto item_at = [&](std::size_t g) {
    const std::size_t epoch = g / data.size();
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng = Rng(cfg.seed).fork(1000 + epoch);
      for (std::size_t i = data.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
      cached_epoch = epoch;
    }
    return order[g % data.size()];
  };

  for (std::size_t local = 0; local < cfg.steps; ++local) {
    const std::size_t gstep = state.step;
    std::vector<std::size_t> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b)
      batch.push_back(item_at(gstep * cfg.batch_size + b));

    std::vector<ItemGrads> results(batch.size());
    const auto worker = [&](std::size_t begin, std::size_t end) {
      for (std::size_t bi = begin; bi < end; ++bi) {
        const std::uint64_t query_seed =
            Rng(cfg.seed).fork(2000 + gstep).fork(bi).next_u64();
        results[bi] = run_item(params, data[batch[bi]], cfg, query_seed);
      }
    };
    const std::size_t n_workers = std::min<std::size_t>(cfg.workers, batch.size());
    if (n_workers <= 1) {
      worker(0, batch.size());
    } else {
      std::vector<std::thread> threads;
      const std::size_t chunk = (batch.size() + n_workers - 1) / n_workers;
      for (std::size_t w = 0; w < n_workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(batch.size(), begin + chunk);
        if (begin < end) threads.emplace_back(worker, begin, end);
      }
      for (std::thread& t : threads) t.join();
    }

    // fixed-order reduction keeps training deterministic under threading
    std::map<std::string, Tensor> grads;
    std::size_t active = 0;
    StepLog log;
    for (const ItemGrads& r : results) {
      if (!r.active) continue;
      ++active;
      log.loss.total += r.loss.total;
      log.loss.dice += r.loss.dice;
      log.loss.bce += r.loss.bce;
      log.loss.objectness += r.loss.objectness;
      log.loss.matched += r.loss.matched;
      if (grads.empty()) {
        grads = r.grads;
      } else {
        for (auto& [name, g] : grads)
          kernels::add(g.data.data(), r.grads.at(name).data.data(), g.numel());
      }
    }
    log.step = state.step;
    log.lr = schedule_lr(state.schedule, state.step);
    log.batch_items = active;
    if (active == 0) {
      // stage-2 batch with no selected masks anywhere: skip, still a step
      ++state.step;
      if (on_step) on_step(log);
      continue;
    }
    for (auto& [name, g] : grads) kernels::scale(g.data.data(), 1.0 / active, g.numel());
    log.loss.total /= active;
    log.loss.dice /= active;
    log.loss.bce /= active;
    log.loss.objectness /= active;
    optimizer_step(params, grads, state);
    if (on_step) on_step(log);
  }
}

// -- optimizer state io --------------------------------------------------------------------

void save_optim_state(const std::filesystem::path& path, const OptimState& state) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open optimizer state for writing: " + path.string());
  json header;
  header["schema"] = "pcseg.optim/1";
  header["step"] = state.step;
  header["beta1"] = state.beta1;
  header["beta2"] = state.beta2;
  header["eps"] = state.eps;
  header["weight_decay"] = state.weight_decay;
  header["skipped_updates"] = state.skipped_updates;
  header["schedule"] = {{"peak_lr", state.schedule.peak_lr},
                        {"warmup_frac", state.schedule.warmup_frac},
                        {"warmup_start_frac", state.schedule.warmup_start_frac},
                        {"final_frac", state.schedule.final_frac},
                        {"total_steps", state.schedule.total_steps}};
  json names = json::array();
  for (const auto& [name, t] : state.m) names.push_back(name);
  header["tensors"] = names;
  const std::string header_str = header.dump();
  const std::uint64_t len = header_str.size();
  out << "pcsegoptim/1\n";
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(len));
  for (const auto& [name, t] : state.m)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
  for (const auto& [name, t] : state.v)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
}

OptimState load_optim_state(const std::filesystem::path& path,
                            const net::NetworkParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("missing optimizer state: " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != "pcsegoptim/1")
    throw ValidationError(path.string() + ": not a pcseg optimizer state");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  json header;
  try {
    header = json::parse(header_str);
    OptimState state;
    state.step = header.at("step").get<std::size_t>();
    state.beta1 = header.at("beta1").get<double>();
    state.beta2 = header.at("beta2").get<double>();
    state.eps = header.at("eps").get<double>();
    state.weight_decay = header.at("weight_decay").get<double>();
    state.skipped_updates = header.at("skipped_updates").get<std::uint64_t>();
    const json& s = header.at("schedule");
    state.schedule.peak_lr = s.at("peak_lr").get<double>();
    state.schedule.warmup_frac = s.at("warmup_frac").get<double>();
    state.schedule.warmup_start_frac = s.at("warmup_start_frac").get<double>();
    state.schedule.final_frac = s.at("final_frac").get<double>();
    state.schedule.total_steps = s.at("total_steps").get<std::size_t>();
    const std::vector<std::string> names = header.at("tensors").get<std::vector<std::string>>();
    for (const std::string& name : names) {
      const auto it = params.tensors.find(name);
      if (it == params.tensors.end())
        throw ValidationError(path.string() + ": unknown tensor " + name);
      state.m.emplace(name, Tensor(it->second.shape));
      state.v.emplace(name, Tensor(it->second.shape));
    }
    for (auto& [name, t] : state.m) {
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
      if (static_cast<std::size_t>(in.gcount()) != t.data.size() * 8)
        throw ValidationError(path.string() + ": truncated moment data");
    }
    for (auto& [name, t] : state.v) {
      in.read(reinterpret_cast<char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
      if (static_cast<std::size_t>(in.gcount()) != t.data.size() * 8)
        throw ValidationError(path.string() + ": truncated moment data");
    }
    return state;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad header: " + e.what());
  }
}

}  // namespace pcseg::train
