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

#include "pcseg/kernels_impl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pcseg::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void matmul_nn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = dot(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + d : d;
    }
  }
}

void matmul_tn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void mul(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void scale(double* y, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

void min_inplace(double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] = std::min(a[i], b[i]);
}

void sqdist(const double q[3], const double* pts, std::size_t n, double* out) {
  const double qx = q[0], qy = q[1], qz = q[2];
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pts[3 * i] - qx;
    const double dy = pts[3 * i + 1] - qy;
    const double dz = pts[3 * i + 2] - qz;
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

void vexp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void sigmoid(const double* h, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = h[i];
    // Evaluate through exp of a non-positive argument so large |h| saturates
    // instead of overflowing.
    if (v >= 0) {
      const double e = std::exp(-v);
      out[i] = 1.0 / (1.0 + e);
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
}

}  // namespace pcseg::kernels::scalar
