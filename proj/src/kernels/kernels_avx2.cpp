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

#include <immintrin.h>

#include <cmath>

#include "ttsel/kernels.hpp"

namespace ttsel::kernels::avx2 {

namespace {

constexpr int kRows = 6;
constexpr int kCols = 16;

// 6x16 register tile: twelve ymm accumulators, two B loads and six
// broadcasts per step of p.
inline void tile_6x16(int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc) {
  __m256 c00 = _mm256_loadu_ps(c + 0 * ldc), c01 = _mm256_loadu_ps(c + 0 * ldc + 8);
  __m256 c10 = _mm256_loadu_ps(c + 1 * ldc), c11 = _mm256_loadu_ps(c + 1 * ldc + 8);
  __m256 c20 = _mm256_loadu_ps(c + 2 * ldc), c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
  __m256 c30 = _mm256_loadu_ps(c + 3 * ldc), c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
  __m256 c40 = _mm256_loadu_ps(c + 4 * ldc), c41 = _mm256_loadu_ps(c + 4 * ldc + 8);
  __m256 c50 = _mm256_loadu_ps(c + 5 * ldc), c51 = _mm256_loadu_ps(c + 5 * ldc + 8);
  for (int p = 0; p < k; ++p) {
    const float* bp = b + static_cast<long>(p) * ldb;
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 av = _mm256_broadcast_ss(a + 0 * lda + p);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a + 1 * lda + p);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a + 2 * lda + p);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a + 3 * lda + p);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(a + 4 * lda + p);
    c40 = _mm256_fmadd_ps(av, b0, c40);
    c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(a + 5 * lda + p);
    c50 = _mm256_fmadd_ps(av, b0, c50);
    c51 = _mm256_fmadd_ps(av, b1, c51);
  }
  _mm256_storeu_ps(c + 0 * ldc, c00), _mm256_storeu_ps(c + 0 * ldc + 8, c01);
  _mm256_storeu_ps(c + 1 * ldc, c10), _mm256_storeu_ps(c + 1 * ldc + 8, c11);
  _mm256_storeu_ps(c + 2 * ldc, c20), _mm256_storeu_ps(c + 2 * ldc + 8, c21);
  _mm256_storeu_ps(c + 3 * ldc, c30), _mm256_storeu_ps(c + 3 * ldc + 8, c31);
  _mm256_storeu_ps(c + 4 * ldc, c40), _mm256_storeu_ps(c + 4 * ldc + 8, c41);
  _mm256_storeu_ps(c + 5 * ldc, c50), _mm256_storeu_ps(c + 5 * ldc + 8, c51);
}

inline void row_1x16(int k, const float* a, const float* b, int ldb, float* c) {
  __m256 c0 = _mm256_loadu_ps(c), c1 = _mm256_loadu_ps(c + 8);
  for (int p = 0; p < k; ++p) {
    const float* bp = b + static_cast<long>(p) * ldb;
    const __m256 av = _mm256_broadcast_ss(a + p);
    c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(bp), c0);
    c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(bp + 8), c1);
  }
  _mm256_storeu_ps(c, c0);
  _mm256_storeu_ps(c + 8, c1);
}

inline void row_1x8(int k, const float* a, const float* b, int ldb, float* c) {
  __m256 c0 = _mm256_loadu_ps(c);
  for (int p = 0; p < k; ++p) {
    c0 = _mm256_fmadd_ps(_mm256_broadcast_ss(a + p), _mm256_loadu_ps(b + static_cast<long>(p) * ldb),
                         c0);
  }
  _mm256_storeu_ps(c, c0);
}

}  // namespace

void gemm_acc(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
              int ldc) {
  const int n16 = n - n % kCols;
  // Column strips outermost so a k x 16 panel of B stays hot in L1 while
  // every row block of A streams past it.
  for (int j = 0; j < n16; j += kCols) {
    int i = 0;
    for (; i + kRows <= m; i += kRows) {
      tile_6x16(k, a + static_cast<long>(i) * lda, lda, b + j, ldb, c + static_cast<long>(i) * ldc + j,
                ldc);
    }
    for (; i < m; ++i) {
      row_1x16(k, a + static_cast<long>(i) * lda, b + j, ldb, c + static_cast<long>(i) * ldc + j);
    }
  }
  int j = n16;
  if (n - j >= 8) {
    for (int i = 0; i < m; ++i) {
      row_1x8(k, a + static_cast<long>(i) * lda, b + j, ldb, c + static_cast<long>(i) * ldc + j);
    }
    j += 8;
  }
  if (j < n) {
    for (int i = 0; i < m; ++i) {
      const float* arow = a + static_cast<long>(i) * lda;
      float* crow = c + static_cast<long>(i) * ldc;
      for (int p = 0; p < k; ++p) {
        const float* bp = b + static_cast<long>(p) * ldb;
        for (int jj = j; jj < n; ++jj) crow[jj] = std::fma(arow[p], bp[jj], crow[jj]);
      }
    }
  }
}

void squared_distances(const float* x, int dim, const float* ct, int k, float* out) {
  const int k8 = k - k % 8;
  for (int j = 0; j < k8; j += 8) {
    __m256 acc = _mm256_setzero_ps();
    for (int d = 0; d < dim; ++d) {
      const __m256 diff =
          _mm256_sub_ps(_mm256_broadcast_ss(x + d), _mm256_loadu_ps(ct + static_cast<long>(d) * k + j));
      acc = _mm256_fmadd_ps(diff, diff, acc);
    }
    _mm256_storeu_ps(out + j, acc);
  }
  for (int j = k8; j < k; ++j) {
    float acc = 0.0f;
    for (int d = 0; d < dim; ++d) {
      const float diff = x[d] - ct[static_cast<long>(d) * k + j];
      acc = std::fma(diff, diff, acc);
    }
    out[j] = acc;
  }
}

}  // namespace ttsel::kernels::avx2
