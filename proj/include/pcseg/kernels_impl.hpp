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

#include <cstddef>

// Per-lane kernel entry points. Consumers use the dispatching wrappers in
// pcseg/kernels.hpp; the per-lane namespaces exist for the dispatcher and
// for lane-equivalence tests.

#define PCSEG_DECLARE_KERNELS                                                                   \
  double dot(const double* a, const double* b, std::size_t n);                                  \
  double sum(const double* x, std::size_t n);                                                   \
  void matmul_nn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,     \
                 std::size_t n, bool accumulate);                                               \
  void matmul_nt(double* c, const double* a, const double* b, std::size_t m, std::size_t k,     \
                 std::size_t n, bool accumulate);                                               \
  void matmul_tn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,     \
                 std::size_t n, bool accumulate);                                               \
  void axpy(double alpha, const double* x, double* y, std::size_t n);                           \
  void add(double* y, const double* x, std::size_t n);                                          \
  void mul(double* y, const double* x, std::size_t n);                                          \
  void scale(double* y, double alpha, std::size_t n);                                           \
  void min_inplace(double* a, const double* b, std::size_t n);                                  \
  void sqdist(const double q[3], const double* pts, std::size_t n, double* out);                \
  void vexp(const double* x, double* out, std::size_t n);                                       \
  void sigmoid(const double* h, double* out, std::size_t n);

namespace pcseg::kernels::scalar {
PCSEG_DECLARE_KERNELS
}

#if defined(__x86_64__)
#define PCSEG_HAVE_AVX2_LANE 1
namespace pcseg::kernels::avx2 {
PCSEG_DECLARE_KERNELS
}
#else
#define PCSEG_HAVE_AVX2_LANE 0
#endif
