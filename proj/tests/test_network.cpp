#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "pcseg/network.hpp"
#include "pcseg/training.hpp"
#include "support/fd_check.hpp"
#include "support/test_utils.hpp"

using namespace pcseg;
using namespace pcseg::net;
using testutil::random_cloud;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.feature_dim = 8;
  cfg.levels = 2;
  cfg.decoder_layers = 1;
  cfg.fourier_bands = 2;
  cfg.ffn_hidden = 12;
  cfg.backbone_base_voxel = 0.4;
  return cfg;
}

mask::MaskSet random_targets(Rng& rng, std::size_t n, std::size_t count) {
  mask::MaskSet ms;
  ms.point_count = n;
  for (std::size_t t = 0; t < count; ++t) {
    mask::Mask m;
    m.id = static_cast<int>(t);
    m.membership.assign(n, 0);
    std::size_t members = 0;
    for (std::size_t i = 0; i < n; ++i) {
      m.membership[i] = rng.uniform01() < 0.4;
      members += m.membership[i];
    }
    if (members == 0) m.membership[rng.uniform_int(n)] = 1;
    ms.masks.push_back(std::move(m));
  }
  return ms;
}

}  // namespace

TEST_CASE("backbone features are finite, one row per point per level") {
  Rng rng(3);
  const NetworkParams params = NetworkParams::init(tiny_config(), 7);

  geom::PointCloud single;
  single.positions = {{0.2, 0.1, 0.4}};
  single.colors = {{0.5, 0.2, 0.9}};
  const auto levels = backbone_forward(params, single);
  REQUIRE(levels.size() == 2);
  for (const auto& f : levels) {
    CHECK(f.rows() == 1);
    CHECK(f.cols() == 8);
    for (double v : f.data) CHECK(std::isfinite(v));
  }

  const geom::PointCloud cloud = random_cloud(rng, 50);
  const auto multi = backbone_forward(params, cloud);
  CHECK(multi[0].rows() == 50);
}

TEST_CASE("translating the cloud by one voxel stride leaves features unchanged") {
  Rng rng(9);
  NetworkConfig cfg = tiny_config();
  cfg.backbone_base_voxel = 0.25;
  const NetworkParams params = NetworkParams::init(cfg, 11);

  geom::PointCloud cloud;
  for (int i = 0; i < 40; ++i) {
    // dyadic coordinates keep p and p + 0.5 exact in floating point and off
    // the voxel boundaries
    cloud.positions.push_back({rng.uniform_int(32) / 16.0 + 1.0 / 32,
                               rng.uniform_int(32) / 16.0 + 1.0 / 32,
                               rng.uniform_int(32) / 16.0 + 1.0 / 32});
    cloud.colors.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});
  }
  geom::PointCloud moved = cloud;
  // one stride of the coarsest level (2 * base), also two strides of level 0
  for (Vec3& p : moved.positions) p += Vec3{0.5, 0.5, 0.5};

  const auto a = backbone_forward(params, cloud);
  const auto b = backbone_forward(params, moved);
  for (std::size_t l = 0; l < a.size(); ++l) {
    REQUIRE(a[l].numel() == b[l].numel());
    for (std::size_t i = 0; i < a[l].numel(); ++i)
      CHECK(a[l].data[i] == doctest::Approx(b[l].data[i]).epsilon(1e-9));
  }
}

TEST_CASE("decoder with zero output projections is the identity on queries") {
  Rng rng(21);
  NetworkParams params = NetworkParams::init(tiny_config(), 5);
  for (auto& [name, tensor] : params.tensors) {
    if (name.find(".cross.o.") != std::string::npos ||
        name.find(".self.o.") != std::string::npos ||
        name.find(".ffn.fc2.") != std::string::npos)
      std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
  }
  const geom::PointCloud cloud = random_cloud(rng, 30);
  ad::Graph g;
  const ForwardPass fp = network_forward(g, params, cloud, 5, 3);
  const ad::Tensor& initial = g.value(fp.initial_queries);
  const ad::Tensor& refined = g.value(fp.refined_queries);
  REQUIRE(initial.numel() == refined.numel());
  for (std::size_t i = 0; i < initial.numel(); ++i)
    CHECK(refined.data[i] == initial.data[i]);
}

TEST_CASE("permuting points permutes heatmap columns and fixes objectness") {
  Rng rng(33);
  const NetworkParams params = NetworkParams::init(tiny_config(), 13);
  const geom::PointCloud cloud = random_cloud(rng, 60);

  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = cloud.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.uniform_int(i)]);

  geom::PointCloud shuffled;
  shuffled.positions.resize(cloud.size());
  shuffled.colors.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    shuffled.positions[perm[i]] = cloud.positions[i];
    shuffled.colors[perm[i]] = cloud.colors[i];
  }
  const std::vector<std::size_t> queries = {3, 17, 41};
  std::vector<std::size_t> queries_shuffled;
  for (std::size_t q : queries) queries_shuffled.push_back(perm[q]);

  ad::Graph g1, g2;
  const ForwardPass fa = network_forward_at(g1, params, cloud, queries);
  const ForwardPass fb = network_forward_at(g2, params, shuffled, queries_shuffled);
  const ad::Tensor& ha = g1.value(fa.heatmaps);
  const ad::Tensor& hb = g2.value(fb.heatmaps);
  double max_delta = 0;
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (std::size_t i = 0; i < cloud.size(); ++i)
      max_delta = std::max(max_delta, std::abs(ha.at(q, i) - hb.at(q, perm[i])));
  CHECK(max_delta < 1e-9);
  const ad::Tensor& oa = g1.value(fa.objectness);
  const ad::Tensor& ob = g2.value(fb.objectness);
  for (std::size_t i = 0; i < oa.numel(); ++i)
    CHECK(oa.data[i] == doctest::Approx(ob.data[i]).epsilon(1e-9));
}

TEST_CASE("predict is deterministic and stays finite across coordinate scales") {
  Rng rng(44);
  const NetworkParams params = NetworkParams::init(tiny_config(), 99);
  for (double scale : {1e-3, 1.0, 1e3}) {
    geom::PointCloud cloud = random_cloud(rng, 40);
    for (Vec3& p : cloud.positions) p = p * scale;
    NetworkConfig cfg = tiny_config();
    cfg.backbone_base_voxel = 0.4 * scale;
    NetworkParams scaled = params;
    scaled.config = cfg;
    const Prediction a = predict(scaled, cloud, 6, 5);
    const Prediction b = predict(scaled, cloud, 6, 5);
    CHECK(a.heatmaps.data == b.heatmaps.data);
    CHECK(a.objectness.data == b.objectness.data);
    for (double v : a.heatmaps.data) CHECK(std::isfinite(v));
    for (double v : a.objectness.data) CHECK(std::isfinite(v));
  }
}

TEST_CASE("query count above N is an argument error; Q = N uses every point") {
  Rng rng(50);
  const NetworkParams params = NetworkParams::init(tiny_config(), 1);
  const geom::PointCloud cloud = random_cloud(rng, 12);
  CHECK_THROWS_AS(predict(params, cloud, 13, 0), ValidationError);
  const Prediction p = predict(params, cloud, 12, 0);
  CHECK(p.query_positions.size() == 12);
}

TEST_CASE("query embeddings differ across distinct positions") {
  Rng rng(60);
  const NetworkParams params = NetworkParams::init(tiny_config(), 2);
  for (int it = 0; it < 20; ++it) {
    const geom::PointCloud cloud = random_cloud(rng, 25);
    ad::Graph g;
    const ForwardPass fp = network_forward(g, params, cloud, 5, it);
    const ad::Tensor& init = g.value(fp.initial_queries);
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = a + 1; b < 5; ++b) {
        double d = 0;
        for (std::size_t c = 0; c < init.cols(); ++c)
          d += std::abs(init.at(a, c) - init.at(b, c));
        CHECK(d > 0);
      }
  }
}

TEST_CASE("binarize: strict threshold at h = 0") {
  const double h[5] = {0.0, -1.0, 2.0, -1e-300, 1e-300};
  const auto bits = binarize(h, 5);
  CHECK(bits == std::vector<std::uint8_t>{0, 0, 1, 0, 1});
}

TEST_CASE("full decoder gradient passes finite differences") {
  // The loss is differentiable only away from Hungarian matching ties (the
  // assignment is a constant to the gradient, as in set-prediction training).
  // A freshly initialized model puts every query on the same mask, which IS
  // a tie, so separate the queries with a few optimizer steps first and then
  // assert the matching margin before differencing.
  Rng rng(70);
  NetworkConfig cfg = tiny_config();
  const geom::PointCloud cloud = random_cloud(rng, 30);
  const std::vector<std::size_t> queries = {2, 11, 23, 29};
  mask::MaskSet targets = random_targets(rng, cloud.size(), 2);
  const train::LossWeights weights;

  NetworkParams params = NetworkParams::init(cfg, 123);
  {
    train::TrainConfig tc;
    tc.stage = 1;
    tc.steps = 40;
    tc.batch_size = 1;
    tc.query_count = queries.size();
    tc.schedule.total_steps = 40;
    tc.schedule.peak_lr = 5e-3;
    tc.seed = 7;
    train::OptimState state = train::OptimState::init(params, tc.schedule, 0.0);
    train::train(params, state, {{cloud, targets}}, tc);
  }
  {
    // margin between the best and second-best assignment
    ad::Graph g;
    const ForwardPass fp = network_forward_at(g, params, cloud, queries);
    net::Prediction pred;
    pred.heatmaps = g.value(fp.heatmaps);
    pred.objectness = g.value(fp.objectness);
    const std::vector<double> costs = train::matching_costs(pred, targets, weights);
    std::vector<double> totals;
    for (std::size_t a = 0; a < queries.size(); ++a)
      for (std::size_t b = 0; b < queries.size(); ++b)
        if (a != b) totals.push_back(costs[a * 2 + 0] + costs[b * 2 + 1]);
    std::sort(totals.begin(), totals.end());
    REQUIRE(totals[1] - totals[0] > 1e-2);
  }
  std::vector<std::string> names;
  for (const auto& [name, t] : params.tensors) names.push_back(name);

  const auto eval = [&](const std::vector<ad::Tensor>& flat) {
    NetworkParams p;
    p.config = cfg;
    for (std::size_t i = 0; i < names.size(); ++i) p.tensors.emplace(names[i], flat[i]);
    ad::Graph g;
    const ForwardPass fp = network_forward_at(g, p, cloud, queries);
    return g.value(train::loss_stage1_graph(g, fp, targets, weights)).data[0];
  };

  std::vector<ad::Tensor> flat;
  for (const auto& [name, t] : params.tensors) flat.push_back(t);

  ad::Graph g;
  const ForwardPass fp = network_forward_at(g, params, cloud, queries);
  ad::Val loss = train::loss_stage1_graph(g, fp, targets, weights);
  g.backward(loss);
  std::vector<ad::Tensor> grads;
  for (const std::string& name : names) grads.push_back(g.grad(fp.params.at(name)));

  const double err = testutil::fd_max_rel_err(eval, flat, grads);
  CHECK(err < 1e-4);
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "pcseg_ckpt_test.ckpt";
  const NetworkParams params = NetworkParams::init(tiny_config(), 77);
  save_checkpoint(path, params);
  const NetworkParams loaded = load_checkpoint(path);
  CHECK(loaded.config.feature_dim == params.config.feature_dim);
  REQUIRE(loaded.tensors.size() == params.tensors.size());
  for (const auto& [name, t] : params.tensors) CHECK(loaded.tensors.at(name).data == t.data);

  std::ofstream bad(path, std::ios::binary);
  bad << "not a checkpoint";
  bad.close();
  CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
  fs::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), MissingInputError);
}
