#pragma once

#include <algorithm>
#include <vector>

#include "pcseg/evaluation.hpp"

namespace pcseg::testutil {

/// Independent brute-force PR enumeration: fresh greedy matching for every
/// prediction prefix, then direct integration of the precision envelope.
inline double oracle_average_precision(const mask::MaskSet& preds, const mask::MaskSet& gts,
                                       double threshold) {
  struct Item {
    double score;
    int id;
    std::size_t index;
  };
  std::vector<Item> order;
  for (std::size_t i = 0; i < preds.masks.size(); ++i)
    order.push_back({preds.masks[i].score.value_or(0.0), preds.masks[i].id, i});
  std::sort(order.begin(), order.end(), [](const Item& a, const Item& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  const std::size_t g = gts.masks.size();
  if (g == 0) return order.empty() ? 1.0 : 0.0;

  std::vector<double> precision, recall;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    std::vector<std::uint8_t> used(g, 0);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double best = 0;
      std::int64_t best_g = -1;
      for (std::size_t j = 0; j < g; ++j) {
        if (used[j]) continue;
        const double v =
            eval::iou(preds.masks[order[i].index].membership, gts.masks[j].membership);
        if (v >= threshold && v > best) {
          best = v;
          best_g = static_cast<std::int64_t>(j);
        }
      }
      if (best_g >= 0) {
        used[static_cast<std::size_t>(best_g)] = 1;
        ++tp;
      }
    }
    precision.push_back(static_cast<double>(tp) / k);
    recall.push_back(static_cast<double>(tp) / g);
  }

  double ap = 0, prev = 0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    double envelope = 0;
    for (std::size_t j = i; j < precision.size(); ++j)
      envelope = std::max(envelope, precision[j]);
    ap += (recall[i] - prev) * envelope;
    prev = recall[i];
  }
  return ap;
}

}  // namespace pcseg::testutil
