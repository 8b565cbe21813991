#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pcseg/training.hpp"
#include "support/test_utils.hpp"

using namespace pcseg;
using namespace pcseg::train;

namespace {

/// Directly assembled prediction (no network) for loss unit tests.
net::Prediction make_prediction(const std::vector<std::vector<double>>& heatmaps,
                                const std::vector<std::pair<double, double>>& logits) {
  net::Prediction p;
  const std::size_t q = heatmaps.size();
  const std::size_t n = heatmaps.empty() ? 0 : heatmaps[0].size();
  p.heatmaps = ad::Tensor({q, n});
  for (std::size_t i = 0; i < q; ++i)
    std::copy(heatmaps[i].begin(), heatmaps[i].end(), p.heatmaps.data.begin() + i * n);
  p.objectness = ad::Tensor({q, 2});
  for (std::size_t i = 0; i < q; ++i) {
    p.objectness.at(i, 0) = logits[i].first;
    p.objectness.at(i, 1) = logits[i].second;
  }
  p.query_positions.assign(q, Vec3{});
  return p;
}

mask::MaskSet masks_of(std::size_t n, const std::vector<std::vector<std::uint8_t>>& rows) {
  mask::MaskSet ms;
  ms.point_count = n;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mask::Mask m;
    m.id = static_cast<int>(i);
    m.membership = rows[i];
    ms.masks.push_back(std::move(m));
  }
  return ms;
}

double brute_force_assignment_min(const std::vector<double>& cost, std::size_t rows,
                                  std::size_t cols) {
  // enumerate injections of the smaller side into the larger side
  const bool transposed = rows > cols;
  const std::size_t n = std::min(rows, cols), m = std::max(rows, cols);
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = transposed ? perm[i] : i;
      const std::size_t c = transposed ? i : perm[i];
      total += cost[r * cols + c];
    }
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("dice loss formula values") {
  const std::vector<double> p1 = {1, 0}, t1 = {1, 0};
  CHECK(dice_loss(p1, t1, 0.0) == doctest::Approx(0.0));
  const std::vector<double> p2 = {1, 0}, t2 = {0, 1};
  CHECK(dice_loss(p2, t2, 0.0) == doctest::Approx(1.0));
  CHECK(dice_loss(p2, t2, 1.0) == doctest::Approx(2.0 / 3).epsilon(1e-9));
}

TEST_CASE("bce loss: ln 2 at zero logits, stable at saturation, matches naive form") {
  const std::vector<double> h0 = {0, 0, 0, 0}, t0 = {1, 0, 1, 0};
  CHECK(bce_loss(h0, t0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const std::vector<double> hs = {40.0}, ts = {1.0};
  const double sat = bce_loss(hs, ts);
  CHECK(std::isfinite(sat));
  CHECK(sat < 1e-15);

  Rng rng(4);
  for (int it = 0; it < 50; ++it) {
    std::vector<double> h(6), t(6);
    for (auto& x : h) x = rng.uniform(-5, 5);
    for (auto& x : t) x = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    double naive = 0;
    for (int i = 0; i < 6; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-h[i]));
      naive += -(t[i] * std::log(s) + (1 - t[i]) * std::log(1 - s));
    }
    naive /= 6;
    CHECK(bce_loss(h, t) == doctest::Approx(naive).epsilon(1e-9));
  }
}

TEST_CASE("objectness loss: saturated, uniform, and hand-summed cases") {
  ad::Tensor strong({3, 2});
  for (int i = 0; i < 3; ++i) {
    strong.at(i, 0) = 20;
    strong.at(i, 1) = -20;
  }
  CHECK(objectness_loss(strong, {0, 0, 0}) < 1e-6);

  ad::Tensor uniform({2, 2});
  CHECK(objectness_loss(uniform, {0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  ad::Tensor mixed({2, 2});
  mixed.at(0, 0) = 1.3;
  mixed.at(0, 1) = -0.4;
  mixed.at(1, 0) = -2.0;
  mixed.at(1, 1) = 0.7;
  const auto ce = [](double a, double b, int label) {
    const double lse = std::log(std::exp(a) + std::exp(b));
    return lse - (label == 0 ? a : b);
  };
  const double expect = 0.5 * (ce(1.3, -0.4, 0) + ce(-2.0, 0.7, 1));
  CHECK(objectness_loss(mixed, {0, 1}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("hungarian: injected matrix, identity case, brute-force oracle") {
  const MatchResult direct = hungarian({1, 2, 2, 1}, 2, 2);
  CHECK(direct.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  CHECK(direct.total_cost == 2.0);

  Rng rng(10);
  for (int it = 0; it < 60; ++it) {
    const std::size_t rows = 1 + rng.uniform_int(7);
    const std::size_t cols = 1 + rng.uniform_int(7);
    std::vector<double> cost(rows * cols);
    for (double& c : cost) c = rng.uniform(-3, 5);
    const MatchResult r = hungarian(cost, rows, cols);
    CHECK(r.pairs.size() == std::min(rows, cols));
    CHECK(r.total_cost == doctest::Approx(brute_force_assignment_min(cost, rows, cols))
                              .epsilon(1e-12));
    CHECK(r.unmatched_queries.size() == rows - r.pairs.size());
  }
}

TEST_CASE("hungarian assignment is invariant to exact positive rescaling") {
  Rng rng(12);
  for (int it = 0; it < 20; ++it) {
    const std::size_t n = 2 + rng.uniform_int(5);
    std::vector<double> cost(n * n);
    for (double& c : cost) c = static_cast<double>(rng.uniform_int(50));
    const MatchResult base = hungarian(cost, n, n);
    for (double s : {2.0, 0.25, 4.0, 3.0}) {  // 3.0 is exact on integer costs
      std::vector<double> scaled = cost;
      for (double& c : scaled) c *= s;
      CHECK(hungarian(scaled, n, n).pairs == base.pairs);
    }
  }
}

TEST_CASE("match_masks prefers the aligned target for near-perfect predictions") {
  const std::vector<std::vector<std::uint8_t>> targets = {{1, 1, 0, 0, 0}, {0, 0, 0, 1, 1}};
  const mask::MaskSet ms = masks_of(5, targets);
  const net::Prediction pred = make_prediction(
      {{30, 30, -30, -30, -30}, {-30, -30, -30, 30, 30}}, {{10, -10}, {10, -10}});
  const MatchResult r = match_masks(pred, ms, LossWeights{});
  CHECK(r.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
}

TEST_CASE("loss_stage1: optimum, zero targets, compositional oracle") {
  const std::vector<std::vector<std::uint8_t>> targets = {{1, 1, 0, 0}, {0, 0, 1, 1}};
  const mask::MaskSet ms = masks_of(4, targets);

  SUBCASE("perfect predictions sit near the optimum") {
    const net::Prediction pred =
        make_prediction({{40, 40, -40, -40}, {-40, -40, 40, 40}}, {{40, -40}, {40, -40}});
    const LossBreakdown l = loss_stage1(pred, ms, LossWeights{});
    CHECK(l.total < 1e-4);
  }
  SUBCASE("zero targets degenerate to the no-object objectness term") {
    const net::Prediction pred = make_prediction({{1, -1, 2, 0}}, {{0.5, -0.25}});
    mask::MaskSet empty;
    empty.point_count = 4;
    const LossBreakdown l = loss_stage1(pred, empty, LossWeights{});
    CHECK(l.matched == 0);
    const double expect =
        2.0 * objectness_loss(pred.objectness, std::vector<int>{1});
    CHECK(l.total == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("random cases equal the hand-assembled weighted sum") {
    Rng rng(31);
    for (int it = 0; it < 20; ++it) {
      const std::size_t n = 6 + rng.uniform_int(6);
      const std::size_t q = 2 + rng.uniform_int(3);
      const std::size_t m = 1 + rng.uniform_int(3);
      std::vector<std::vector<double>> heat(q, std::vector<double>(n));
      std::vector<std::pair<double, double>> logits(q);
      for (auto& row : heat)
        for (double& h : row) h = rng.uniform(-4, 4);
      for (auto& l : logits) l = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
      std::vector<std::vector<std::uint8_t>> tg(m, std::vector<std::uint8_t>(n));
      for (auto& row : tg) {
        bool any = false;
        for (auto& b : row) {
          b = rng.uniform01() < 0.5;
          any = any || b;
        }
        if (!any) row[0] = 1;
      }
      const net::Prediction pred = make_prediction(heat, logits);
      const mask::MaskSet targets = masks_of(n, tg);
      LossWeights w;
      w.lambda_obj = 2;
      w.lambda_dice = 2;
      w.lambda_ce = 5;

      const MatchResult match = match_masks(pred, targets, w);
      double dice_sum = 0, bce_sum = 0;
      for (const auto& [qi, ti] : match.pairs) {
        std::vector<double> probs(n), target(n);
        for (std::size_t i = 0; i < n; ++i) {
          probs[i] = 1.0 / (1.0 + std::exp(-heat[qi][i]));
          target[i] = tg[ti][i];
        }
        dice_sum += dice_loss(probs, target);
        bce_sum += bce_loss(heat[qi], target);
      }
      std::vector<int> labels(q, 1);
      for (const auto& [qi, ti] : match.pairs) labels[qi] = 0;
      const double expect = (w.lambda_dice * dice_sum + w.lambda_ce * bce_sum) /
                                match.pairs.size() +
                            w.lambda_obj * objectness_loss(pred.objectness, labels);

      const LossBreakdown got = loss_stage1(pred, targets, w);
      CHECK(got.total == doctest::Approx(expect).epsilon(1e-10));

      // stage 2 drops exactly the objectness term
      const LossBreakdown s2 = loss_stage2(pred, targets, w);
      CHECK(s2.total ==
            doctest::Approx(got.total - w.lambda_obj * got.objectness).epsilon(1e-10));
    }
  }
  SUBCASE("stage 2 ignores spurious extra queries") {
    const net::Prediction two =
        make_prediction({{40, 40, -40, -40}, {-40, -40, 40, 40}}, {{40, -40}, {40, -40}});
    const net::Prediction three = make_prediction(
        {{40, 40, -40, -40}, {-40, -40, 40, 40}, {40, -40, 40, -40}},
        {{40, -40}, {40, -40}, {40, -40}});
    const double a = loss_stage2(two, ms, LossWeights{}).total;
    const double b = loss_stage2(three, ms, LossWeights{}).total;
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    mask::MaskSet empty;
    empty.point_count = 4;
    CHECK(loss_stage2(two, empty, LossWeights{}).total == 0.0);
  }
}

TEST_CASE("graph losses equal the scalar forms") {
  Rng rng(77);
  net::NetworkConfig cfg;
  cfg.feature_dim = 8;
  cfg.levels = 2;
  cfg.decoder_layers = 1;
  cfg.fourier_bands = 2;
  cfg.ffn_hidden = 12;
  cfg.backbone_base_voxel = 0.4;
  const net::NetworkParams params = net::NetworkParams::init(cfg, 3);
  const geom::PointCloud cloud = testutil::random_cloud(rng, 40);
  mask::MaskSet targets;
  targets.point_count = 40;
  for (int t = 0; t < 3; ++t) {
    mask::Mask m;
    m.id = t;
    m.membership.assign(40, 0);
    for (int i = 0; i < 40; ++i) m.membership[i] = rng.uniform01() < 0.3;
    if (m.member_count() == 0) m.membership[t] = 1;
    targets.masks.push_back(std::move(m));
  }

  ad::Graph g;
  const net::ForwardPass fp = net::network_forward(g, params, cloud, 5, 9);
  net::Prediction pred;
  pred.heatmaps = g.value(fp.heatmaps);
  pred.objectness = g.value(fp.objectness);

  const double graph1 = g.value(loss_stage1_graph(g, fp, targets, LossWeights{})).data[0];
  CHECK(graph1 == doctest::Approx(loss_stage1(pred, targets, LossWeights{}).total)
                      .epsilon(1e-10));
  const double graph2 = g.value(loss_stage2_graph(g, fp, targets, LossWeights{})).data[0];
  CHECK(graph2 == doctest::Approx(loss_stage2(pred, targets, LossWeights{}).total)
                      .epsilon(1e-10));
}

TEST_CASE("one-cycle schedule endpoints and shape") {
  ScheduleSpec s;
  s.peak_lr = 2e-4;
  s.warmup_frac = 0.1;
  s.warmup_start_frac = 0.01;
  s.final_frac = 0.01;
  s.total_steps = 100;
  CHECK(schedule_lr(s, 0) == doctest::Approx(2e-6));
  CHECK(schedule_lr(s, 10) == doctest::Approx(2e-4));
  CHECK(schedule_lr(s, 100) == doctest::Approx(2e-6));
  // monotone up on the warmup, monotone down after
  for (int i = 0; i < 10; ++i) CHECK(schedule_lr(s, i) < schedule_lr(s, i + 1));
  for (int i = 10; i < 100; ++i) CHECK(schedule_lr(s, i) >= schedule_lr(s, i + 1));
}

TEST_CASE("optimizer: no-op on zero gradients, skips non-finite, descends a quadratic") {
  net::NetworkConfig cfg;
  cfg.feature_dim = 2;
  cfg.levels = 1;
  cfg.decoder_layers = 1;
  cfg.fourier_bands = 1;
  cfg.ffn_hidden = 2;
  cfg.backbone_base_voxel = 0.5;
  net::NetworkParams params = net::NetworkParams::init(cfg, 0);

  ScheduleSpec sched;
  sched.total_steps = 10;
  OptimState state = OptimState::init(params, sched, 0.0);

  std::map<std::string, ad::Tensor> zeros;
  for (const auto& [name, t] : params.tensors) zeros.emplace(name, ad::Tensor(t.shape));
  const auto before = params.tensors;
  optimizer_step(params, zeros, state);
  for (const auto& [name, t] : params.tensors) CHECK(t.data == before.at(name).data);

  auto bad = zeros;
  bad.begin()->second.data[0] = std::numeric_limits<double>::quiet_NaN();
  optimizer_step(params, bad, state);
  CHECK(state.skipped_updates == 1);
  for (const auto& [name, t] : params.tensors) CHECK(t.data == before.at(name).data);

  // scalar quadratic 0.5*(x-3)^2 via a fake single-tensor parameter set
  net::NetworkParams scalar_p;
  scalar_p.config = cfg;
  scalar_p.tensors.emplace("x", ad::Tensor::scalar(0.0));
  ScheduleSpec flat;
  flat.peak_lr = 0.02;
  flat.warmup_frac = 0.0;
  flat.final_frac = 1.0;
  flat.total_steps = 100;
  OptimState s2 = OptimState::init(scalar_p, flat, 0.0);
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const double x = scalar_p.tensors.at("x").data[0];
    const double obj = 0.5 * (x - 3) * (x - 3);
    if (i % 10 == 0) {
      CHECK(obj <= prev_obj + 1e-12);
      prev_obj = obj;
    }
    std::map<std::string, ad::Tensor> g;
    g.emplace("x", ad::Tensor::scalar(x - 3));
    optimizer_step(scalar_p, g, s2);
  }
  CHECK(std::abs(scalar_p.tensors.at("x").data[0] - 3) < 1.5);
}

TEST_CASE("training is deterministic and resumes bit-identically") {
  Rng rng(5);
  net::NetworkConfig cfg;
  cfg.feature_dim = 8;
  cfg.levels = 2;
  cfg.decoder_layers = 1;
  cfg.fourier_bands = 2;
  cfg.ffn_hidden = 12;
  cfg.backbone_base_voxel = 0.4;

  std::vector<TrainItem> data;
  for (int i = 0; i < 3; ++i) {
    TrainItem item;
    item.cloud = testutil::random_cloud(rng, 30);
    item.targets.point_count = 30;
    mask::Mask m;
    m.id = 0;
    m.membership.assign(30, 0);
    for (int j = 0; j < 30; ++j) m.membership[j] = j % 2 == i % 2;
    item.targets.masks.push_back(std::move(m));
    data.push_back(std::move(item));
  }

  TrainConfig tc;
  tc.stage = 1;
  tc.steps = 6;
  tc.batch_size = 2;
  tc.query_count = 5;
  tc.schedule.total_steps = 6;
  tc.seed = 11;

  const auto run = [&](std::size_t first_leg, std::size_t second_leg, int workers) {
    net::NetworkParams p = net::NetworkParams::init(cfg, 42);
    OptimState s = OptimState::init(p, tc.schedule, 0.01);
    TrainConfig leg = tc;
    leg.workers = workers;
    leg.steps = first_leg;
    pcseg::train::train(p, s, data, leg);
    leg.steps = second_leg;
    if (second_leg > 0) pcseg::train::train(p, s, data, leg);
    return p;
  };

  const net::NetworkParams a = run(6, 0, 1);
  const net::NetworkParams b = run(3, 3, 1);   // resumed halfway
  const net::NetworkParams c = run(6, 0, 2);   // threaded batch
  for (const auto& [name, t] : a.tensors) {
    CHECK(b.tensors.at(name).data == t.data);
    CHECK(c.tensors.at(name).data == t.data);
  }
}

TEST_CASE("optimizer state round-trips through its sidecar file") {
  net::NetworkConfig cfg;
  cfg.feature_dim = 4;
  cfg.levels = 1;
  cfg.decoder_layers = 1;
  cfg.fourier_bands = 1;
  cfg.ffn_hidden = 4;
  cfg.backbone_base_voxel = 0.5;
  net::NetworkParams params = net::NetworkParams::init(cfg, 8);
  ScheduleSpec sched;
  sched.total_steps = 50;
  OptimState state = OptimState::init(params, sched, 0.02);
  state.step = 17;
  state.m.begin()->second.data[0] = 0.125;
  state.v.begin()->second.data[0] = 0.5;

  const auto path = std::filesystem::temp_directory_path() / "pcseg_optim_test.bin";
  save_optim_state(path, state);
  const OptimState loaded = load_optim_state(path, params);
  CHECK(loaded.step == 17);
  CHECK(loaded.weight_decay == 0.02);
  CHECK(loaded.m.begin()->second.data[0] == 0.125);
  CHECK(loaded.v.begin()->second.data[0] == 0.5);
  CHECK(loaded.schedule.total_steps == 50);
  std::filesystem::remove(path);
}
