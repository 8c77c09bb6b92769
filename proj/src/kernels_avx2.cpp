/* Copyright 2026 The SpecVerify Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <immintrin.h>

#include <array>

#include "specverify/kernels.hpp"

namespace specverify::kernels {

namespace {

// Folds the vector accumulator and the scalar tail (elements n4..n-1) into
// four lanes, then combines them in the reference order.
double finish(__m256d acc, const double* tail, std::size_t n4, std::size_t n) {
  alignas(32) std::array<double, 4> lanes;
  _mm256_store_pd(lanes.data(), acc);
  for (std::size_t i = n4; i < n; ++i) lanes[i % 4] += tail[i - n4];
  return ref::combine_lanes(lanes);
}

double avx2_sum(const double* a, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  }
  return finish(acc, a + n4, n4, n);
}

double avx2_sum_min(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_min_pd(vb, va));
  }
  std::array<double, 3> tail{};
  for (std::size_t i = n4; i < n; ++i) {
    tail[i - n4] = (b[i] < a[i]) ? b[i] : a[i];
  }
  return finish(acc, tail.data(), n4, n);
}

double avx2_sum_scaled_min(double s, const double* a, const double* b,
                           std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(s);
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d sa = _mm256_mul_pd(vs, _mm256_loadu_pd(a + i));
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_add_pd(acc, _mm256_min_pd(vb, sa));
  }
  std::array<double, 3> tail{};
  for (std::size_t i = n4; i < n; ++i) {
    double sa = s * a[i];
    tail[i - n4] = (b[i] < sa) ? b[i] : sa;
  }
  return finish(acc, tail.data(), n4, n);
}

double avx2_sum_scaled_pos(double s, const double* a, const double* b,
                           std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(s);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_mul_pd(vs, _mm256_loadu_pd(a + i)),
                              _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_max_pd(d, zero));
  }
  std::array<double, 3> tail{};
  for (std::size_t i = n4; i < n; ++i) {
    double d = s * a[i] - b[i];
    tail[i - n4] = (0.0 < d) ? d : 0.0;
  }
  return finish(acc, tail.data(), n4, n);
}

double avx2_scaled_pos(double s, const double* a, const double* b, double* out,
                       std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(s);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_mul_pd(vs, _mm256_loadu_pd(a + i)),
                              _mm256_loadu_pd(b + i));
    d = _mm256_max_pd(d, zero);
    _mm256_storeu_pd(out + i, d);
    acc = _mm256_add_pd(acc, d);
  }
  for (std::size_t i = n4; i < n; ++i) {
    double d = s * a[i] - b[i];
    out[i] = (0.0 < d) ? d : 0.0;
  }
  return finish(acc, out + n4, n4, n);
}

void avx2_divide(double* a, double s, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  const __m256d vs = _mm256_set1_pd(s);
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(a + i, _mm256_div_pd(_mm256_loadu_pd(a + i), vs));
  }
  for (std::size_t i = n4; i < n; ++i) a[i] = a[i] / s;
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{
    Isa::kAvx2,          avx2_sum,        avx2_sum_min,
    avx2_sum_scaled_min, avx2_sum_scaled_pos, avx2_scaled_pos,
    avx2_divide,
};

}  // namespace specverify::kernels
