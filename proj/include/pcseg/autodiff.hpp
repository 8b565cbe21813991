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

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "pcseg/common.hpp"

// Minimal reverse-mode differentiation over dense double tensors. A Graph
// owns a tape of nodes; every op records its parents and a backward closure.
// Nodes are created in topological order, so the backward pass is a reverse
// sweep over the tape.

namespace pcseg::ad {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(numel_of(shape), fill) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }
  static Tensor scalar(double v) {
    Tensor t({1});
    t.data[0] = v;
    return t;
  }
  static Tensor row_major(std::size_t rows, std::size_t cols, std::vector<double> values) {
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

class Graph;

/// Handle to a node on a Graph's tape.
struct Val {
  Graph* graph = nullptr;
  std::size_t id = 0;

  bool valid() const { return graph != nullptr; }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf node (parameter or input).
  Val input(Tensor value);

  const Tensor& value(Val v) const { return nodes_[v.id]->value; }
  const Tensor& grad(Val v) const { return nodes_[v.id]->grad; }
  std::size_t size() const { return nodes_.size(); }

  // elementwise
  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  Val mul(Val a, Val b);
  Val scale(Val a, double s);
  Val add_const(Val a, Tensor c);  // c carries no gradient
  Val relu(Val a);
  Val sigmoid(Val a);

  // linear algebra ([m,k] conventions in comments)
  Val matmul(Val a, Val b);     // [m,k] x [k,n] -> [m,n]
  Val matmul_nt(Val a, Val b);  // [m,k] x [n,k]^T -> [m,n]
  Val matmul_tn(Val a, Val b);  // [k,m]^T x [k,n] -> [m,n]
  Val add_rowvec(Val a, Val bias);  // bias [n] broadcast over rows of [m,n]

  // shape plumbing
  Val gather_rows(Val a, std::vector<std::size_t> rows);
  Val concat_cols(Val a, Val b);  // [r,ca] ++ [r,cb] -> [r,ca+cb]
  /// Mean over each group of rows; an empty group yields a zero row.
  Val pool_rows_mean(Val a, std::vector<std::vector<std::size_t>> groups);
  /// Broadcast row assign[i] of a [G,c] tensor to output row i.
  Val scatter_rows(Val a, std::vector<std::size_t> assign);

  // normalization & attention pieces
  Val softmax_rows(Val a);
  Val layer_norm(Val x, Val gamma, Val beta, double eps = 1e-5);

  // reductions
  Val sum_all(Val a);
  Val mean_all(Val a);

  /// Temperature-scaled cosine similarity between rows of f [Q,D] and rows
  /// of g [N,D]: out[q,i] = s * cos(f_q, g_i). Norms are smoothed with a tiny
  /// epsilon so the op stays differentiable at zero vectors.
  Val cosine_scores(Val f, Val g, Val temperature);

  // losses (targets are constants)
  Val dice_loss(Val probs, std::vector<double> target, double eps);
  Val bce_with_logits(Val logits, std::vector<double> target);
  Val cross_entropy_rows(Val logits, std::vector<int> labels);

  /// Runs the reverse sweep from a scalar node; gradients accumulate on
  /// every node reachable backwards from it.
  void backward(Val loss_node);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> back;  // empty for leaves
  };

  Val emplace(Tensor value, std::function<void()> back = nullptr);
  Tensor& grad_ref(Val v) { return nodes_[v.id]->grad; }

  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace pcseg::ad
