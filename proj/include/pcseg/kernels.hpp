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
#include <string>
#include <string_view>

// Double-precision arithmetic kernels behind the hot loops (linear algebra
// in the network, heatmap evaluation, point-distance sweeps). Every kernel
// has a scalar reference implementation and, on x86-64 with AVX2+FMA, a
// vectorized variant selected at runtime. Elementwise kernels (axpy, add,
// mul, scale, min_inplace, sqdist) are bit-exact across lanes; reductions
// (dot, sum, matmul_*) and transcendentals (vexp, sigmoid) may differ in
// the last ulps due to reassociation and are equivalence-tested under a
// tight tolerance instead.

namespace pcseg::kernels {

enum class Backend { kScalar, kAvx2 };

/// Currently active lane.
Backend active_backend();
const char* backend_name();

/// Selects a lane: "auto" picks the best supported, "scalar" and "avx2"
/// force one. Returns false (and leaves the lane unchanged) if the request
/// is unsupported on this CPU. Not thread-safe against concurrent kernels.
bool set_backend(std::string_view name);

/// True if the AVX2 lane is compiled in and the CPU supports it.
bool avx2_available();

// -- reductions -------------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);

// -- small dense matmul, row-major ------------------------------------------
// c[m x n]. When accumulate is false, c is overwritten.

/// c = a[m x k] * b[k x n]
void matmul_nn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate = false);
/// c = a[m x k] * b[n x k]^T
void matmul_nt(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate = false);
/// c = a[k x m]^T * b[k x n]
void matmul_tn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate = false);

// -- elementwise (bit-exact across lanes) ------------------------------------

/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
void add(double* y, const double* x, std::size_t n);
void mul(double* y, const double* x, std::size_t n);
void scale(double* y, double alpha, std::size_t n);
/// a[i] = min(a[i], b[i])
void min_inplace(double* a, const double* b, std::size_t n);
/// out[i] = squared Euclidean distance from q to pts[3*i..3*i+2]
void sqdist(const double q[3], const double* pts, std::size_t n, double* out);

// -- transcendentals ---------------------------------------------------------

void vexp(const double* x, double* out, std::size_t n);
void sigmoid(const double* h, double* out, std::size_t n);

}  // namespace pcseg::kernels
