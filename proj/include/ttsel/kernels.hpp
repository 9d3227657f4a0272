// Copyright 2026 The ttsel Authors
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

// Dense arithmetic inner loops shared by the scoring network and the unit
// quantizer. Every kernel has a portable scalar reference and, on x86-64, an
// AVX2+FMA variant selected at runtime.
//
// Both variants evaluate each output element as the same sequential chain of
// fused multiply-adds, so they agree bit for bit. That property is what lets
// batched scoring, multithreaded scoring and the reference path all produce
// byte-identical score files.

#include <string_view>

namespace ttsel::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend b);
bool backend_supported(Backend b);

// Backend used by the dispatching entry points below. Defaults to the best
// supported backend; TTSEL_KERNELS=scalar in the environment forces the
// reference path.
Backend active_backend();
void set_backend(Backend b);

// C[m x n] += A[m x k] * B[k x n], row-major with leading dimensions.
// Each C(i,j) is updated as c = fma(A(i,p), B(p,j), c) for p = 0..k-1.
void gemm_acc(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
              int ldc);
// Double precision is used only by the gradient checker; scalar path always.
void gemm_acc(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
              int ldc);

// out[j] = sum_d (x[d] - ct[d * k + j])^2 for j in [0, k), where ct holds the
// k centroids transposed (dim-major). Accumulation runs over d in order with
// fma, so the result for centroid j does not depend on k or the backend.
void squared_distances(const float* x, int dim, const float* ct, int k, float* out);

// Index of the smallest entry; ties go to the lowest index.
int argmin(const float* v, int n);

// Row-major transpose: dst[n x m] = src[m x n]^T.
template <typename T>
void transpose(int m, int n, const T* src, int lds, T* dst, int ldd) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) dst[j * ldd + i] = src[i * lds + j];
  }
}

namespace scalar {
void gemm_acc(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
              int ldc);
void gemm_acc(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
              int ldc);
void squared_distances(const float* x, int dim, const float* ct, int k, float* out);
}  // namespace scalar

namespace avx2 {
// Only callable when backend_supported(Backend::kAvx2).
void gemm_acc(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
              int ldc);
void squared_distances(const float* x, int dim, const float* ct, int k, float* out);
}  // namespace avx2

}  // namespace ttsel::kernels
