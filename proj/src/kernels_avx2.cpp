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

#if PCSEG_HAVE_AVX2_LANE

#include <immintrin.h>

#include <cstring>

namespace pcseg::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// Cephes-style exp on 4 lanes. Inputs are clamped to [-708, 708]; within
// that range the result matches libm to a few ulps.
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(708.0));

  const __m256d n = _mm256_floor_pd(_mm256_fmadd_pd(x, log2e, _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(n, c1, x);
  x = _mm256_fnmadd_pd(n, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000005e0));
  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(bits));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void matmul_nn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(ai[p]);
      const double* bp = b + p * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cj = _mm256_loadu_pd(ci + j);
        cj = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cj);
        _mm256_storeu_pd(ci + j, cj);
      }
      const double avs = ai[p];
      for (; j < n; ++j) ci[j] += avs * bp[j];
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
      const __m256d av = _mm256_set1_pd(ap[i]);
      double* ci = c + i * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cj = _mm256_loadu_pd(ci + j);
        cj = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j), cj);
        _mm256_storeu_pd(ci + j, cj);
      }
      const double avs = ap[i];
      for (; j < n; ++j) ci[j] += avs * bp[j];
    }
  }
}

// The elementwise kernels below intentionally avoid FMA so they round
// identically to the scalar lane.

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add(double* y, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] += x[i];
}

void mul(double* y, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] *= x[i];
}

void scale(double* y, double alpha, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), av));
  for (; i < n; ++i) y[i] *= alpha;
}

void min_inplace(double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    // blend matching std::min semantics: pick b only when b < a
    const __m256d mask = _mm256_cmp_pd(vb, va, _CMP_LT_OQ);
    _mm256_storeu_pd(a + i, _mm256_blendv_pd(va, vb, mask));
  }
  for (; i < n; ++i)
    if (b[i] < a[i]) a[i] = b[i];
}

void sqdist(const double q[3], const double* pts, std::size_t n, double* out) {
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* p = pts + 3 * i;
    const __m256d x = _mm256_set_pd(p[9], p[6], p[3], p[0]);
    const __m256d y = _mm256_set_pd(p[10], p[7], p[4], p[1]);
    const __m256d z = _mm256_set_pd(p[11], p[8], p[5], p[2]);
    const __m256d dx = _mm256_sub_pd(x, qx);
    const __m256d dy = _mm256_sub_pd(y, qy);
    const __m256d dz = _mm256_sub_pd(z, qz);
    const __m256d d =
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                      _mm256_mul_pd(dz, dz));
    _mm256_storeu_pd(out + i, d);
  }
  for (; i < n; ++i) {
    const double dx = pts[3 * i] - q[0];
    const double dy = pts[3 * i + 1] - q[1];
    const double dz = pts[3 * i + 2] - q[2];
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

void vexp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) {
    double buf[4] = {x[i], 0, 0, 0};
    double res[4];
    _mm256_storeu_pd(res, exp4(_mm256_loadu_pd(buf)));
    out[i] = res[0];
  }
}

void sigmoid(const double* h, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(h + i);
    const __m256d neg_abs = _mm256_min_pd(v, _mm256_sub_pd(zero, v));
    const __m256d e = exp4(neg_abs);
    const __m256d nonneg = _mm256_cmp_pd(v, zero, _CMP_GE_OQ);
    const __m256d num = _mm256_blendv_pd(e, one, nonneg);
    _mm256_storeu_pd(out + i, _mm256_div_pd(num, _mm256_add_pd(one, e)));
  }
  for (; i < n; ++i) {
    double buf[4] = {h[i], 0, 0, 0};
    double res[4];
    const __m256d v = _mm256_loadu_pd(buf);
    const __m256d neg_abs = _mm256_min_pd(v, _mm256_sub_pd(zero, v));
    const __m256d e = exp4(neg_abs);
    const __m256d nonneg = _mm256_cmp_pd(v, zero, _CMP_GE_OQ);
    const __m256d num = _mm256_blendv_pd(e, one, nonneg);
    _mm256_storeu_pd(res, _mm256_div_pd(num, _mm256_add_pd(one, e)));
    out[i] = res[0];
  }
}

}  // namespace pcseg::kernels::avx2

#endif  // PCSEG_HAVE_AVX2_LANE
