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

#include "pcseg/kernels.hpp"

#include "pcseg/kernels_impl.hpp"

namespace pcseg::kernels {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  void (*matmul_nn)(double*, const double*, const double*, std::size_t, std::size_t, std::size_t,
                    bool);
  void (*matmul_nt)(double*, const double*, const double*, std::size_t, std::size_t, std::size_t,
                    bool);
  void (*matmul_tn)(double*, const double*, const double*, std::size_t, std::size_t, std::size_t,
                    bool);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*add)(double*, const double*, std::size_t);
  void (*mul)(double*, const double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  void (*min_inplace)(double*, const double*, std::size_t);
  void (*sqdist)(const double*, const double*, std::size_t, double*);
  void (*vexp)(const double*, double*, std::size_t);
  void (*sigmoid)(const double*, double*, std::size_t);
};

constexpr Table kScalarTable = {
    scalar::dot,  scalar::sum,   scalar::matmul_nn, scalar::matmul_nt,   scalar::matmul_tn,
    scalar::axpy, scalar::add,   scalar::mul,       scalar::scale,       scalar::min_inplace,
    scalar::sqdist, scalar::vexp, scalar::sigmoid};

#if PCSEG_HAVE_AVX2_LANE
constexpr Table kAvx2Table = {
    avx2::dot,  avx2::sum,   avx2::matmul_nn, avx2::matmul_nt,   avx2::matmul_tn,
    avx2::axpy, avx2::add,   avx2::mul,       avx2::scale,       avx2::min_inplace,
    avx2::sqdist, avx2::vexp, avx2::sigmoid};
#endif

bool detect_avx2() {
#if PCSEG_HAVE_AVX2_LANE
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct State {
  Backend backend;
  const Table* table;
  State() {
    if (detect_avx2()) {
      backend = Backend::kAvx2;
#if PCSEG_HAVE_AVX2_LANE
      table = &kAvx2Table;
#else
      table = &kScalarTable;
#endif
    } else {
      backend = Backend::kScalar;
      table = &kScalarTable;
    }
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Backend active_backend() { return state().backend; }

const char* backend_name() {
  return state().backend == Backend::kAvx2 ? "avx2" : "scalar";
}

bool avx2_available() { return detect_avx2(); }

bool set_backend(std::string_view name) {
  State& s = state();
  if (name == "scalar") {
    s.backend = Backend::kScalar;
    s.table = &kScalarTable;
    return true;
  }
  if (name == "avx2") {
    if (!detect_avx2()) return false;
#if PCSEG_HAVE_AVX2_LANE
    s.backend = Backend::kAvx2;
    s.table = &kAvx2Table;
    return true;
#else
    return false;
#endif
  }
  if (name == "auto") {
    s = State();
    return true;
  }
  return false;
}

double dot(const double* a, const double* b, std::size_t n) { return state().table->dot(a, b, n); }
double sum(const double* x, std::size_t n) { return state().table->sum(x, n); }

void matmul_nn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  state().table->matmul_nn(c, a, b, m, k, n, accumulate);
}
void matmul_nt(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  state().table->matmul_nt(c, a, b, m, k, n, accumulate);
}
void matmul_tn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  state().table->matmul_tn(c, a, b, m, k, n, accumulate);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  state().table->axpy(alpha, x, y, n);
}
void add(double* y, const double* x, std::size_t n) { state().table->add(y, x, n); }
void mul(double* y, const double* x, std::size_t n) { state().table->mul(y, x, n); }
void scale(double* y, double alpha, std::size_t n) { state().table->scale(y, alpha, n); }
void min_inplace(double* a, const double* b, std::size_t n) {
  state().table->min_inplace(a, b, n);
}
void sqdist(const double q[3], const double* pts, std::size_t n, double* out) {
  state().table->sqdist(q, pts, n, out);
}
void vexp(const double* x, double* out, std::size_t n) { state().table->vexp(x, out, n); }
void sigmoid(const double* h, double* out, std::size_t n) { state().table->sigmoid(h, out, n); }

}  // namespace pcseg::kernels
