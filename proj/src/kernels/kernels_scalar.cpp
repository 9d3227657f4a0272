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

#include <cmath>

#include "ttsel/kernels.hpp"

namespace ttsel::kernels::scalar {

namespace {

template <typename T>
void gemm_ref(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<long>(i) * lda;
    T* crow = c + static_cast<long>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + static_cast<long>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

}  // namespace

void gemm_acc(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
              int ldc) {
  gemm_ref(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_acc(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
              int ldc) {
  gemm_ref(m, n, k, a, lda, b, ldb, c, ldc);
}

void squared_distances(const float* x, int dim, const float* ct, int k, float* out) {
  for (int j = 0; j < k; ++j) out[j] = 0.0f;
  for (int d = 0; d < dim; ++d) {
    const float xd = x[d];
    const float* row = ct + static_cast<long>(d) * k;
    for (int j = 0; j < k; ++j) {
      const float diff = xd - row[j];
      out[j] = std::fma(diff, diff, out[j]);
    }
  }
}

}  // namespace ttsel::kernels::scalar
