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

#include <atomic>
#include <cstdlib>
#include <string>

#include "ttsel/common.hpp"
#include "ttsel/kernels.hpp"

namespace ttsel::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(TTSEL_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("TTSEL_KERNELS")) {
    if (std::string(env) == "scalar") return Backend::kScalar;
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_supported(Backend b) {
  if (b == Backend::kScalar) return true;
  static const bool avx2 = cpu_has_avx2();
  return avx2;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw Error("kernel backend not supported on this CPU: " + std::string(backend_name(b)));
  }
  current().store(b, std::memory_order_relaxed);
}

void gemm_acc(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c,
              int ldc) {
  if (m <= 0 || n <= 0 || k <= 0) return;
#if defined(TTSEL_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2) {
    avx2::gemm_acc(m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#endif
  scalar::gemm_acc(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_acc(int m, int n, int k, const double* a, int lda, const double* b, int ldb, double* c,
              int ldc) {
  if (m <= 0 || n <= 0 || k <= 0) return;
  scalar::gemm_acc(m, n, k, a, lda, b, ldb, c, ldc);
}

void squared_distances(const float* x, int dim, const float* ct, int k, float* out) {
#if defined(TTSEL_HAVE_AVX2)
  if (active_backend() == Backend::kAvx2) {
    avx2::squared_distances(x, dim, ct, k, out);
    return;
  }
#endif
  scalar::squared_distances(x, dim, ct, k, out);
}

int argmin(const float* v, int n) {
  int best = 0;
  for (int j = 1; j < n; ++j) {
    if (v[j] < v[best]) best = j;
  }
  return best;
}

#if !defined(TTSEL_HAVE_AVX2)
namespace avx2 {
void gemm_acc(int, int, int, const float*, int, const float*, int, float*, int) {
  throw Error("avx2 kernels not compiled in");
}
void squared_distances(const float*, int, const float*, int, float*) {
  throw Error("avx2 kernels not compiled in");
}
}  // namespace avx2
#endif

}  // namespace ttsel::kernels
