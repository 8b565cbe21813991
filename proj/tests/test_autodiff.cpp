#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pcseg/autodiff.hpp"
#include "support/fd_check.hpp"
#include "support/test_utils.hpp"

using namespace pcseg;
using namespace pcseg::ad;
using testutil::fd_max_rel_err;
using testutil::random_tensor;

namespace {

// Projects a tensor output to a scalar through a fixed random weighting so
// every output element influences the loss.
Val project(Graph& g, Val out, const Tensor& w) {
  Val wv = g.input(w);
  return g.sum_all(g.mul(out, wv));
}

}  // namespace

TEST_CASE("forward values: elementwise and matmul") {
  Graph g;
  Val a = g.input(Tensor::row_major(1, 3, {1, 2, 3}));
  Val b = g.input(Tensor::row_major(1, 3, {4, 5, 6}));
  CHECK(g.value(g.add(a, b)).data == std::vector<double>{5, 7, 9});
  CHECK(g.value(g.sub(a, b)).data == std::vector<double>{-3, -3, -3});
  CHECK(g.value(g.mul(a, b)).data == std::vector<double>{4, 10, 18});

  Val m = g.input(Tensor::row_major(2, 2, {1, 2, 3, 4}));
  Val n = g.input(Tensor::row_major(2, 2, {5, 6, 7, 8}));
  CHECK(g.value(g.matmul(m, n)).data == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  Graph g;
  Val a = g.input(Tensor::row_major(2, 3, {1, 2, 3, -5, 0, 5}));
  const Tensor s = g.value(g.softmax_rows(a));
  CHECK(s.data[0] + s.data[1] + s.data[2] == doctest::Approx(1.0));
  CHECK(s.data[3] + s.data[4] + s.data[5] == doctest::Approx(1.0));

  Val shifted = g.input(Tensor::row_major(2, 3, {101, 102, 103, 95, 100, 105}));
  const Tensor s2 = g.value(g.softmax_rows(shifted));
  for (int i = 0; i < 6; ++i) CHECK(s2.data[i] == doctest::Approx(s.data[i]));
}

TEST_CASE("gradients pass central finite differences on random small shapes") {
  Rng rng(2024);
  const double tol = 1e-4;

  struct Case {
    const char* name;
    std::vector<std::vector<std::size_t>> shapes;
    std::function<Val(Graph&, const std::vector<Val>&)> build;
  };

  const Tensor w23 = random_tensor(rng, {2, 3});
  const Tensor w24 = random_tensor(rng, {2, 4});
  const Tensor w35 = random_tensor(rng, {3, 5});
  const Tensor w47 = random_tensor(rng, {4, 7});

  std::vector<Case> cases = {
      {"add", {{2, 3}, {2, 3}},
       [&](Graph& g, const std::vector<Val>& in) { return project(g, g.add(in[0], in[1]), w23); }},
      {"sub", {{2, 3}, {2, 3}},
       [&](Graph& g, const std::vector<Val>& in) { return project(g, g.sub(in[0], in[1]), w23); }},
      {"mul", {{2, 3}, {2, 3}},
       [&](Graph& g, const std::vector<Val>& in) { return project(g, g.mul(in[0], in[1]), w23); }},
      {"scale", {{2, 3}},
       [&](Graph& g, const std::vector<Val>& in) { return project(g, g.scale(in[0], -1.7), w23); }},
      {"relu", {{2, 3}},
       [&](Graph& g, const std::vector<Val>& in) { return project(g, g.relu(in[0]), w23); }},
      {"sigmoid", {{2, 3}},
       [&](Graph& g, const std::vector<Val>& in) { return project(g, g.sigmoid(in[0]), w23); }},
      {"matmul", {{2, 4}, {4, 3}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.matmul(in[0], in[1]), w23);
       }},
      {"matmul_nt", {{2, 5}, {3, 5}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.matmul_nt(in[0], in[1]), w23);
       }},
      {"matmul_tn", {{5, 2}, {5, 3}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.matmul_tn(in[0], in[1]), w23);
       }},
      {"add_rowvec", {{2, 3}, {3}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.add_rowvec(in[0], in[1]), w23);
       }},
      {"gather_rows", {{4, 3}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.gather_rows(in[0], {2, 0}), w23);
       }},
      {"concat_cols", {{2, 1}, {2, 2}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.concat_cols(in[0], in[1]), w23);
       }},
      {"pool_rows_mean", {{5, 3}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.pool_rows_mean(in[0], {{0, 2, 4}, {1}}), w23);
       }},
      {"scatter_rows", {{2, 3}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.scatter_rows(in[0], {1, 0}), w23);
       }},
      {"softmax_rows", {{2, 4}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.softmax_rows(in[0]), w24);
       }},
      {"layer_norm", {{3, 5}, {5}, {5}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.layer_norm(in[0], in[1], in[2]), w35);
       }},
      {"mean_all", {{3, 5}},
       [&](Graph& g, const std::vector<Val>& in) { return g.mean_all(in[0]); }},
      {"cosine_scores", {{4, 6}, {7, 6}, {1}},
       [&](Graph& g, const std::vector<Val>& in) {
         return project(g, g.cosine_scores(in[0], in[1], in[2]), w47);
       }},
  };

  for (const Case& c : cases) {
    CAPTURE(c.name);
    std::vector<Tensor> params;
    for (const auto& s : c.shapes) params.push_back(random_tensor(rng, s, -1.5, 1.5));

    const auto eval = [&](const std::vector<Tensor>& p) {
      Graph g;
      std::vector<Val> in;
      for (const Tensor& t : p) in.push_back(g.input(t));
      return g.value(c.build(g, in)).data[0];
    };

    Graph g;
    std::vector<Val> in;
    for (const Tensor& t : params) in.push_back(g.input(t));
    Val loss = c.build(g, in);
    g.backward(loss);
    std::vector<Tensor> grads;
    for (Val v : in) grads.push_back(g.grad(v));

    const double err = fd_max_rel_err(eval, params, grads);
    CHECK_MESSAGE(err < tol, c.name << " max rel err " << err);
  }
}

TEST_CASE("loss node gradients pass finite differences") {
  Rng rng(31337);
  const double tol = 1e-4;

  SUBCASE("dice") {
    std::vector<double> target = {1, 0, 1, 1, 0, 0, 1, 0};
    Tensor p = random_tensor(rng, {8}, 0.05, 0.95);
    const auto eval = [&](const std::vector<Tensor>& in) {
      Graph g;
      return g.value(g.dice_loss(g.input(in[0]), target, 1.0)).data[0];
    };
    Graph g;
    Val pv = g.input(p);
    g.backward(g.dice_loss(pv, target, 1.0));
    CHECK(fd_max_rel_err(eval, {p}, {g.grad(pv)}) < tol);
  }
  SUBCASE("bce_with_logits") {
    std::vector<double> target = {1, 0, 1, 0, 0, 1};
    Tensor h = random_tensor(rng, {6}, -3, 3);
    const auto eval = [&](const std::vector<Tensor>& in) {
      Graph g;
      return g.value(g.bce_with_logits(g.input(in[0]), target)).data[0];
    };
    Graph g;
    Val hv = g.input(h);
    g.backward(g.bce_with_logits(hv, target));
    CHECK(fd_max_rel_err(eval, {h}, {g.grad(hv)}) < tol);
  }
  SUBCASE("cross_entropy_rows") {
    std::vector<int> labels = {0, 1, 1, 0};
    Tensor l = random_tensor(rng, {4, 2}, -2, 2);
    const auto eval = [&](const std::vector<Tensor>& in) {
      Graph g;
      return g.value(g.cross_entropy_rows(g.input(in[0]), labels)).data[0];
    };
    Graph g;
    Val lv = g.input(l);
    g.backward(g.cross_entropy_rows(lv, labels));
    CHECK(fd_max_rel_err(eval, {l}, {g.grad(lv)}) < tol);
  }
}

TEST_CASE("bce_with_logits is stable at extreme logits") {
  Graph g;
  Val h = g.input(Tensor::row_major(1, 2, {40.0, -40.0}));
  const double loss = g.value(g.bce_with_logits(h, {1.0, 0.0})).data[0];
  CHECK(std::isfinite(loss));
  CHECK(loss < 1e-15);
}

TEST_CASE("gradient accumulates across reused nodes") {
  // loss = sum(a*a) -> dL/da = 2a
  Graph g;
  Val a = g.input(Tensor::row_major(1, 3, {1, -2, 3}));
  g.backward(g.sum_all(g.mul(a, a)));
  CHECK(g.grad(a).data == std::vector<double>{2, -4, 6});
}
