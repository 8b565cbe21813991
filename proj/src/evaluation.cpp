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

#include "pcseg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace pcseg::eval {

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw ValidationError("iou: mask lengths disagree");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ia = a[i] != 0, ib = b[i] != 0;
    inter += (ia && ib);
    uni += (ia || ib);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct SizeRange {
  std::size_t lo = 0;  // exclusive
  std::size_t hi = std::numeric_limits<std::size_t>::max();  // inclusive
  bool contains(std::size_t n) const { return n > lo && n <= hi; }
};

struct ApOptions {
  double iou_threshold = 0.5;
  std::optional<SizeRange> bucket;  // also triggers structural exclusion
};

struct FlatPred {
  double score;
  std::size_t scene;
  int id;
  std::size_t index;  // into that scene's mask list
};

/// Pooled greedy-matched AP. With a bucket: structural or out-of-bucket GT
/// is "ignored" — matching a prediction to it removes the prediction from
/// scoring, as does an unmatched prediction whose own size is out of range.
double pooled_ap(const std::vector<ScenePair>& scenes, const ApOptions& opt) {
  std::vector<FlatPred> preds;
  std::size_t gt_total = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (std::size_t p = 0; p < scenes[s].preds.masks.size(); ++p) {
      const mask::Mask& m = scenes[s].preds.masks[p];
      if (!m.score)
        throw ValidationError("evaluate: prediction mask " + std::to_string(m.id) +
                              " has no score");
      preds.push_back({*m.score, s, m.id, p});
    }
    for (const mask::Mask& g : scenes[s].gts.masks) {
      const bool ignored =
          opt.bucket && (g.structural || !opt.bucket->contains(g.member_count()));
      if (!ignored) ++gt_total;
    }
  }
  std::sort(preds.begin(), preds.end(), [](const FlatPred& a, const FlatPred& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scene != b.scene) return a.scene < b.scene;
    return a.id < b.id;
  });

  std::vector<std::vector<std::uint8_t>> gt_used(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s)
    gt_used[s].assign(scenes[s].gts.masks.size(), 0);

  std::vector<int> outcome;  // 1 TP, 0 FP, -1 ignored
  outcome.reserve(preds.size());
  for (const FlatPred& fp : preds) {
    const mask::Mask& pm = scenes[fp.scene].preds.masks[fp.index];
    const auto& gts = scenes[fp.scene].gts.masks;

    double best_iou = 0;
    std::int64_t best_g = -1;
    double best_ign_iou = 0;
    std::int64_t best_ign = -1;
    for (std::size_t gidx = 0; gidx < gts.size(); ++gidx) {
      if (gt_used[fp.scene][gidx]) continue;
      const double v = iou(pm.membership, gts[gidx].membership);
      if (v < opt.iou_threshold) continue;
      const bool ignored =
          opt.bucket && (gts[gidx].structural || !opt.bucket->contains(gts[gidx].member_count()));
      if (ignored) {
        if (v > best_ign_iou) {
          best_ign_iou = v;
          best_ign = static_cast<std::int64_t>(gidx);
        }
      } else if (v > best_iou) {
        best_iou = v;
        best_g = static_cast<std::int64_t>(gidx);
      }
    }
    if (best_g >= 0) {
      gt_used[fp.scene][static_cast<std::size_t>(best_g)] = 1;
      outcome.push_back(1);
    } else if (best_ign >= 0) {
      outcome.push_back(-1);  // matched an excluded mask: neither TP nor FP
    } else if (opt.bucket && !opt.bucket->contains(pm.member_count())) {
      outcome.push_back(-1);  // out-of-bucket unmatched prediction
    } else {
      outcome.push_back(0);
    }
  }

  if (gt_total == 0) {
    // vacuous success only when every prediction was ignored as well
    return std::none_of(outcome.begin(), outcome.end(), [](int o) { return o >= 0; }) ? 1.0
                                                                                      : 0.0;
  }
  std::vector<double> precision, recall;
  std::size_t tp = 0, fp_count = 0;
  for (int o : outcome) {
    if (o < 0) continue;
    if (o == 1) ++tp; else ++fp_count;
    precision.push_back(static_cast<double>(tp) / (tp + fp_count));
    recall.push_back(static_cast<double>(tp) / gt_total);
  }
  if (precision.empty()) return 0.0;

  // all-point interpolation: integrate the precision envelope over recall
  for (std::size_t i = precision.size() - 1; i-- > 0;)
    precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

}  // namespace

double average_precision(const mask::MaskSet& preds, const mask::MaskSet& gts,
                         double iou_threshold) {
  if (preds.point_count != gts.point_count)
    throw ValidationError("average_precision: point counts disagree");
  return pooled_ap({{preds, gts}}, {iou_threshold, std::nullopt});
}

EvalReport evaluate_scenes(const std::vector<ScenePair>& scenes) {
  for (const ScenePair& s : scenes)
    if (s.preds.point_count != s.gts.point_count)
      throw ValidationError("evaluate: pred/gt point counts disagree");

  EvalReport report;
  for (const ScenePair& s : scenes) {
    report.pred_count += s.preds.masks.size();
    report.gt_count += s.gts.masks.size();
  }
  double ap_sum = 0;
  for (int t = 0; t < 10; ++t)
    ap_sum += pooled_ap(scenes, {0.50 + 0.05 * t, std::nullopt});
  report.ap = ap_sum / 10.0;
  report.ap50 = pooled_ap(scenes, {0.50, std::nullopt});
  report.ap25 = pooled_ap(scenes, {0.25, std::nullopt});

  const SizeRange small{0, 2000};
  const SizeRange medium{2000, 15000};
  const SizeRange large{15000, std::numeric_limits<std::size_t>::max()};
  report.small = {pooled_ap(scenes, {0.50, small}), pooled_ap(scenes, {0.25, small})};
  report.medium = {pooled_ap(scenes, {0.50, medium}), pooled_ap(scenes, {0.25, medium})};
  report.large = {pooled_ap(scenes, {0.50, large}), pooled_ap(scenes, {0.25, large})};
  return report;
}

EvalReport evaluate(const mask::MaskSet& preds, const mask::MaskSet& gts) {
  return evaluate_scenes({{preds, gts}});
}

std::string report_json(const EvalReport& r) {
  nlohmann::json doc;
  doc["ap"] = r.ap;
  doc["ap50"] = r.ap50;
  doc["ap25"] = r.ap25;
  doc["buckets"] = {{"small", {{"ap50", r.small.ap50}, {"ap25", r.small.ap25}}},
                    {"medium", {{"ap50", r.medium.ap50}, {"ap25", r.medium.ap25}}},
                    {"large", {{"ap50", r.large.ap50}, {"ap25", r.large.ap25}}}};
  doc["pred_count"] = r.pred_count;
  doc["gt_count"] = r.gt_count;
  return doc.dump(2);
}

}  // namespace pcseg::eval
