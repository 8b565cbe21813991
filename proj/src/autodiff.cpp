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

#include "pcseg/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "pcseg/kernels.hpp"

namespace pcseg::ad {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) throw ValidationError(std::string(op) + ": shape mismatch");
}

constexpr double kNormEps2 = 1e-24;  // squared norm smoothing in cosine_scores

}  // namespace

Val Graph::emplace(Tensor value, std::function<void()> back) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  node->grad = Tensor(node->value.shape);
  node->back = std::move(back);
  nodes_.push_back(std::move(node));
  return Val{this, nodes_.size() - 1};
}

Val Graph::input(Tensor value) { return emplace(std::move(value)); }

Val Graph::add(Val a, Val b) {
  check_same_shape(value(a), value(b), "add");
  Tensor out = value(a);
  kernels::add(out.data.data(), value(b).data.data(), out.numel());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v] {
    const Tensor& g = grad(v);
    kernels::add(grad_ref(a).data.data(), g.data.data(), g.numel());
    kernels::add(grad_ref(b).data.data(), g.data.data(), g.numel());
  };
  return v;
}

Val Graph::sub(Val a, Val b) {
  check_same_shape(value(a), value(b), "sub");
  Tensor out = value(a);
  kernels::axpy(-1.0, value(b).data.data(), out.data.data(), out.numel());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v] {
    const Tensor& g = grad(v);
    kernels::add(grad_ref(a).data.data(), g.data.data(), g.numel());
    kernels::axpy(-1.0, g.data.data(), grad_ref(b).data.data(), g.numel());
  };
  return v;
}

Val Graph::mul(Val a, Val b) {
  check_same_shape(value(a), value(b), "mul");
  Tensor out = value(a);
  kernels::mul(out.data.data(), value(b).data.data(), out.numel());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v] {
    const Tensor& g = grad(v);
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    Tensor& ga = grad_ref(a);
    Tensor& gb = grad_ref(b);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      ga.data[i] += g.data[i] * bv.data[i];
      gb.data[i] += g.data[i] * av.data[i];
    }
  };
  return v;
}

Val Graph::scale(Val a, double s) {
  Tensor out = value(a);
  kernels::scale(out.data.data(), s, out.numel());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v, s] {
    kernels::axpy(s, grad(v).data.data(), grad_ref(a).data.data(), grad(v).numel());
  };
  return v;
}

Val Graph::add_const(Val a, Tensor c) {
  check_same_shape(value(a), c, "add_const");
  Tensor out = value(a);
  kernels::add(out.data.data(), c.data.data(), out.numel());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v] {
    kernels::add(grad_ref(a).data.data(), grad(v).data.data(), grad(v).numel());
  };
  return v;
}

Val Graph::relu(Val a) {
  Tensor out = value(a);
  for (double& x : out.data) x = x > 0 ? x : 0.0;
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v] {
    const Tensor& g = grad(v);
    const Tensor& av = value(a);
    Tensor& ga = grad_ref(a);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (av.data[i] > 0) ga.data[i] += g.data[i];
  };
  return v;
}

Val Graph::sigmoid(Val a) {
  Tensor out(value(a).shape);
  kernels::sigmoid(value(a).data.data(), out.data.data(), out.numel());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v] {
    const Tensor& g = grad(v);
    const Tensor& s = value(v);
    Tensor& ga = grad_ref(a);
    for (std::size_t i = 0; i < g.numel(); ++i)
      ga.data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
  };
  return v;
}

Val Graph::matmul(Val a, Val b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.rows()) throw ValidationError("matmul: inner dimensions disagree");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::matmul_nn(out.data.data(), av.data.data(), bv.data.data(), m, k, n, false);
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v, m, k, n] {
    const Tensor& g = grad(v);
    // dA += dC * B^T ; dB += A^T * dC
    kernels::matmul_nt(grad_ref(a).data.data(), g.data.data(), value(b).data.data(), m, n, k,
                       true);
    kernels::matmul_tn(grad_ref(b).data.data(), value(a).data.data(), g.data.data(), k, m, n,
                       true);
  };
  return v;
}

Val Graph::matmul_nt(Val a, Val b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.cols()) throw ValidationError("matmul_nt: inner dimensions disagree");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor out({m, n});
  kernels::matmul_nt(out.data.data(), av.data.data(), bv.data.data(), m, k, n, false);
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v, m, k, n] {
    const Tensor& g = grad(v);  // [m,n]
    // dA += dC * B ; dB += dC^T * A
    kernels::matmul_nn(grad_ref(a).data.data(), g.data.data(), value(b).data.data(), m, n, k,
                       true);
    kernels::matmul_tn(grad_ref(b).data.data(), g.data.data(), value(a).data.data(), n, m, k,
                       true);
  };
  return v;
}

Val Graph::matmul_tn(Val a, Val b) {
  const Tensor& av = value(a);  // [k,m]
  const Tensor& bv = value(b);  // [k,n]
  if (av.rows() != bv.rows()) throw ValidationError("matmul_tn: inner dimensions disagree");
  const std::size_t k = av.rows(), m = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::matmul_tn(out.data.data(), av.data.data(), bv.data.data(), m, k, n, false);
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v, m, k, n] {
    const Tensor& g = grad(v);  // [m,n]
    // dA += B * dC^T  ([k,n] x [n,m]) ; dB += A * dC ([k,m] x [m,n])
    kernels::matmul_nt(grad_ref(a).data.data(), value(b).data.data(), g.data.data(), k, n, m,
                       true);
    kernels::matmul_nn(grad_ref(b).data.data(), value(a).data.data(), g.data.data(), k, m, n,
                       true);
  };
  return v;
}

Val Graph::add_rowvec(Val a, Val bias) {
  const Tensor& av = value(a);
  const Tensor& bv = value(bias);
  if (bv.numel() != av.cols()) throw ValidationError("add_rowvec: bias length mismatch");
  Tensor out = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    kernels::add(out.data.data() + r * av.cols(), bv.data.data(), av.cols());
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, bias, v] {
    const Tensor& g = grad(v);
    kernels::add(grad_ref(a).data.data(), g.data.data(), g.numel());
    Tensor& gb = grad_ref(bias);
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r)
      kernels::add(gb.data.data(), g.data.data() + r * cols, cols);
  };
  return v;
}

Val Graph::gather_rows(Val a, std::vector<std::size_t> rows) {
  const Tensor& av = value(a);
  const std::size_t cols = av.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = av.at(rows[r], c);
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v, rows = std::move(rows), cols] {
    const Tensor& g = grad(v);
    Tensor& ga = grad_ref(a);
    for (std::size_t r = 0; r < rows.size(); ++r)
      kernels::add(ga.data.data() + rows[r] * cols, g.data.data() + r * cols, cols);
  };
  return v;
}

Val Graph::concat_cols(Val a, Val b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rows() != bv.rows()) throw ValidationError("concat_cols: row counts disagree");
  const std::size_t r = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(av.data.data() + i * ca, ca, out.data.data() + i * (ca + cb));
    std::copy_n(bv.data.data() + i * cb, cb, out.data.data() + i * (ca + cb) + ca);
  }
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, b, v, r, ca, cb] {
    const Tensor& g = grad(v);
    Tensor& ga = grad_ref(a);
    Tensor& gb = grad_ref(b);
    for (std::size_t i = 0; i < r; ++i) {
      kernels::add(ga.data.data() + i * ca, g.data.data() + i * (ca + cb), ca);
      kernels::add(gb.data.data() + i * cb, g.data.data() + i * (ca + cb) + ca, cb);
    }
  };
  return v;
}

Val Graph::pool_rows_mean(Val a, std::vector<std::vector<std::size_t>> groups) {
  const Tensor& av = value(a);
  const std::size_t cols = av.cols();
  Tensor out({groups.size(), cols});
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].empty()) continue;
    double* row = out.data.data() + gi * cols;
    for (std::size_t m : groups[gi]) kernels::add(row, av.data.data() + m * cols, cols);
    kernels::scale(row, 1.0 / groups[gi].size(), cols);
  }
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v, groups = std::move(groups), cols] {
    const Tensor& g = grad(v);
    Tensor& ga = grad_ref(a);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      if (groups[gi].empty()) continue;
      const double inv = 1.0 / groups[gi].size();
      for (std::size_t m : groups[gi])
        kernels::axpy(inv, g.data.data() + gi * cols, ga.data.data() + m * cols, cols);
    }
  };
  return v;
}

Val Graph::scatter_rows(Val a, std::vector<std::size_t> assign) {
  const Tensor& av = value(a);
  const std::size_t cols = av.cols();
  Tensor out({assign.size(), cols});
  for (std::size_t i = 0; i < assign.size(); ++i)
    std::copy_n(av.data.data() + assign[i] * cols, cols, out.data.data() + i * cols);
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v, assign = std::move(assign), cols] {
    const Tensor& g = grad(v);
    Tensor& ga = grad_ref(a);
    for (std::size_t i = 0; i < assign.size(); ++i)
      kernels::add(ga.data.data() + assign[i] * cols, g.data.data() + i * cols, cols);
  };
  return v;
}

Val Graph::softmax_rows(Val a) {
  const Tensor& av = value(a);
  Tensor out = av;
  const std::size_t rows = av.rows(), cols = av.cols();
  std::vector<double> e(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    for (std::size_t c = 0; c < cols; ++c) e[c] = row[c] - mx;
    kernels::vexp(e.data(), row, cols);
    const double total = kernels::sum(row, cols);
    kernels::scale(row, 1.0 / total, cols);
  }
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v, rows, cols] {
    const Tensor& g = grad(v);
    const Tensor& y = value(v);
    Tensor& ga = grad_ref(a);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.data.data() + r * cols;
      const double* yr = y.data.data() + r * cols;
      const double dotgy = kernels::dot(gr, yr, cols);
      double* gar = ga.data.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gar[c] += yr[c] * (gr[c] - dotgy);
    }
  };
  return v;
}

Val Graph::layer_norm(Val x, Val gamma, Val beta, double eps) {
  const Tensor& xv = value(x);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (value(gamma).numel() != cols || value(beta).numel() != cols)
    throw ValidationError("layer_norm: gamma/beta length mismatch");

  Tensor out({rows, cols});
  // cache mean and inverse stddev per row for the backward pass
  auto stats = std::make_shared<std::vector<double>>(2 * rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data.data() + r * cols;
    const double mean = kernels::sum(xr, cols) / cols;
    double var = 0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= cols;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * r] = mean;
    (*stats)[2 * r + 1] = inv_std;
    for (std::size_t c = 0; c < cols; ++c)
      out.at(r, c) = (xr[c] - mean) * inv_std * value(gamma).data[c] + value(beta).data[c];
  }
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, x, gamma, beta, v, rows, cols, stats] {
    const Tensor& g = grad(v);
    const Tensor& xv2 = value(x);
    const Tensor& gm = value(gamma);
    Tensor& gx = grad_ref(x);
    Tensor& gg = grad_ref(gamma);
    Tensor& gb = grad_ref(beta);
    std::vector<double> xhat(cols), dxhat(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double mean = (*stats)[2 * r];
      const double inv_std = (*stats)[2 * r + 1];
      const double* xr = xv2.data.data() + r * cols;
      const double* gr = g.data.data() + r * cols;
      double sum_dxhat = 0, sum_dxhat_xhat = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        xhat[c] = (xr[c] - mean) * inv_std;
        dxhat[c] = gr[c] * gm.data[c];
        sum_dxhat += dxhat[c];
        sum_dxhat_xhat += dxhat[c] * xhat[c];
        gg.data[c] += gr[c] * xhat[c];
        gb.data[c] += gr[c];
      }
      const double inv_n = 1.0 / cols;
      for (std::size_t c = 0; c < cols; ++c)
        gx.data[r * cols + c] +=
            inv_std * (dxhat[c] - inv_n * sum_dxhat - xhat[c] * inv_n * sum_dxhat_xhat);
    }
  };
  return v;
}

Val Graph::sum_all(Val a) {
  Tensor out = Tensor::scalar(kernels::sum(value(a).data.data(), value(a).numel()));
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v] {
    const double g = grad(v).data[0];
    Tensor& ga = grad_ref(a);
    for (double& x : ga.data) x += g;
  };
  return v;
}

Val Graph::mean_all(Val a) {
  const std::size_t n = value(a).numel();
  Tensor out = Tensor::scalar(kernels::sum(value(a).data.data(), n) / n);
  Val v = emplace(std::move(out));
  nodes_[v.id]->back = [this, a, v, n] {
    const double g = grad(v).data[0] / n;
    Tensor& ga = grad_ref(a);
    for (double& x : ga.data) x += g;
  };
  return v;
}

Val Graph::cosine_scores(Val f, Val g, Val temperature) {
  const Tensor& fv = value(f);  // [Q,D]
  const Tensor& gv = value(g);  // [N,D]
  if (fv.cols() != gv.cols()) throw ValidationError("cosine_scores: feature dims disagree");
  if (value(temperature).numel() != 1)
    throw ValidationError("cosine_scores: temperature must be scalar");
  const std::size_t q = fv.rows(), n = gv.rows(), d = fv.cols();
  const double temp = value(temperature).data[0];

  auto fnorm = std::make_shared<std::vector<double>>(q);
  auto gnorm = std::make_shared<std::vector<double>>(n);
  auto fhat = std::make_shared<Tensor>(Tensor({q, d}));
  auto ghat = std::make_shared<Tensor>(Tensor({n, d}));
  for (std::size_t i = 0; i < q; ++i) {
    const double* row = fv.data.data() + i * d;
    const double norm = std::sqrt(kernels::dot(row, row, d) + kNormEps2);
    (*fnorm)[i] = norm;
    for (std::size_t c = 0; c < d; ++c) fhat->at(i, c) = row[c] / norm;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = gv.data.data() + i * d;
    const double norm = std::sqrt(kernels::dot(row, row, d) + kNormEps2);
    (*gnorm)[i] = norm;
    for (std::size_t c = 0; c < d; ++c) ghat->at(i, c) = row[c] / norm;
  }
  Tensor cos({q, n});
  kernels::matmul_nt(cos.data.data(), fhat->data.data(), ghat->data.data(), q, d, n, false);
  auto cos_cache = std::make_shared<Tensor>(cos);
  kernels::scale(cos.data.data(), temp, cos.numel());

  Val v = emplace(std::move(cos));
  nodes_[v.id]->back = [this, f, g, temperature, v, q, n, d, temp, fnorm, gnorm, fhat, ghat,
                        cos_cache] {
    const Tensor& gout = grad(v);  // [Q,N]
    // d temperature = sum dH .* cos
    double dtemp = kernels::dot(gout.data.data(), cos_cache->data.data(), gout.numel());
    grad_ref(temperature).data[0] += dtemp;

    // dFhat = temp * dH * Ghat ; dGhat = temp * dH^T * Fhat
    Tensor dfhat({q, d}), dghat({n, d});
    kernels::matmul_nn(dfhat.data.data(), gout.data.data(), ghat->data.data(), q, n, d, false);
    kernels::scale(dfhat.data.data(), temp, dfhat.numel());
    kernels::matmul_tn(dghat.data.data(), gout.data.data(), fhat->data.data(), n, q, d, false);
    kernels::scale(dghat.data.data(), temp, dghat.numel());

    // unit-vector backward: dx = (dxhat - (dxhat . xhat) xhat) / norm
    Tensor& gf = grad_ref(f);
    for (std::size_t i = 0; i < q; ++i) {
      const double* dh = dfhat.data.data() + i * d;
      const double* xh = fhat->data.data() + i * d;
      const double proj = kernels::dot(dh, xh, d);
      const double inv = 1.0 / (*fnorm)[i];
      for (std::size_t c = 0; c < d; ++c) gf.data[i * d + c] += (dh[c] - proj * xh[c]) * inv;
    }
    Tensor& gg = grad_ref(g);
    for (std::size_t i = 0; i < n; ++i) {
      const double* dh = dghat.data.data() + i * d;
      const double* xh = ghat->data.data() + i * d;
      const double proj = kernels::dot(dh, xh, d);
      const double inv = 1.0 / (*gnorm)[i];
      for (std::size_t c = 0; c < d; ++c) gg.data[i * d + c] += (dh[c] - proj * xh[c]) * inv;
    }
  };
  return v;
}

Val Graph::dice_loss(Val probs, std::vector<double> target, double eps) {
  const Tensor& p = value(probs);
  if (p.numel() != target.size()) throw ValidationError("dice_loss: length mismatch");
  double inter = 0, psum = 0, tsum = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    inter += p.data[i] * target[i];
    psum += p.data[i];
    tsum += target[i];
  }
  const double num = 2 * inter + eps;
  const double den = psum + tsum + eps;
  Val v = emplace(Tensor::scalar(1.0 - num / den));
  nodes_[v.id]->back = [this, probs, v, target = std::move(target), num, den] {
    const double g = grad(v).data[0];
    Tensor& gp = grad_ref(probs);
    const double den2 = den * den;
    for (std::size_t i = 0; i < target.size(); ++i)
      gp.data[i] += g * (num - 2 * target[i] * den) / den2;
  };
  return v;
}

Val Graph::bce_with_logits(Val logits, std::vector<double> target) {
  const Tensor& h = value(logits);
  if (h.numel() != target.size()) throw ValidationError("bce: length mismatch");
  const std::size_t n = target.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = h.data[i];
    // max(x,0) - x t + log(1 + exp(-|x|))
    total += std::max(x, 0.0) - x * target[i] + std::log1p(std::exp(-std::abs(x)));
  }
  Val v = emplace(Tensor::scalar(total / n));
  nodes_[v.id]->back = [this, logits, v, target = std::move(target), n] {
    const double g = grad(v).data[0] / n;
    const Tensor& h2 = value(logits);
    Tensor& gh = grad_ref(logits);
    std::vector<double> sig(n);
    kernels::sigmoid(h2.data.data(), sig.data(), n);
    for (std::size_t i = 0; i < n; ++i) gh.data[i] += g * (sig[i] - target[i]);
  };
  return v;
}

Val Graph::cross_entropy_rows(Val logits, std::vector<int> labels) {
  const Tensor& l = value(logits);
  const std::size_t rows = l.rows(), cols = l.cols();
  if (labels.size() != rows) throw ValidationError("cross_entropy: label count mismatch");
  double total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = l.data.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double lse = 0;
    for (std::size_t c = 0; c < cols; ++c) lse += std::exp(row[c] - mx);
    lse = mx + std::log(lse);
    total += lse - row[labels[r]];
  }
  Val v = emplace(Tensor::scalar(total / rows));
  nodes_[v.id]->back = [this, logits, v, labels = std::move(labels), rows, cols] {
    const double g = grad(v).data[0] / rows;
    const Tensor& l2 = value(logits);
    Tensor& gl = grad_ref(logits);
    std::vector<double> sm(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = l2.data.data() + r * cols;
      double mx = row[0];
      for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
      double total_exp = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        sm[c] = std::exp(row[c] - mx);
        total_exp += sm[c];
      }
      for (std::size_t c = 0; c < cols; ++c) {
        const double p = sm[c] / total_exp;
        gl.data[r * cols + c] += g * (p - (labels[r] == static_cast<int>(c) ? 1.0 : 0.0));
      }
    }
  };
  return v;
}

void Graph::backward(Val loss_node) {
  if (value(loss_node).numel() != 1)
    throw ValidationError("backward: loss must be a scalar node");
  grad_ref(loss_node).data[0] = 1.0;
  for (std::size_t i = loss_node.id + 1; i-- > 0;) {
    if (nodes_[i]->back) nodes_[i]->back();
  }
}

}  // namespace pcseg::ad
