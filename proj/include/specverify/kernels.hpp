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

#pragma once

// Vocabulary-length reductions used by every probability routine.
//
// The reference kernels accumulate in four interleaved lanes (element i goes
// to lane i % 4) and combine the lanes as (l0 + l1) + (l2 + l3). The AVX2
// kernels use the same association order, so both paths are bitwise equal
// on doubles and results do not depend on the host ISA.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <type_traits>

namespace specverify::kernels {

namespace ref {

template <class T>
T combine_lanes(const std::array<T, 4>& lanes) {
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

template <class T>
T sum(std::span<const T> a) {
  std::array<T, 4> lanes{T(0), T(0), T(0), T(0)};
  for (std::size_t i = 0; i < a.size(); ++i) lanes[i % 4] += a[i];
  return combine_lanes(lanes);
}

// Sum of min(a_i, b_i).
template <class T>
T sum_min(std::span<const T> a, std::span<const T> b) {
  std::array<T, 4> lanes{T(0), T(0), T(0), T(0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    lanes[i % 4] += (b[i] < a[i]) ? b[i] : a[i];
  }
  return combine_lanes(lanes);
}

// Sum of min(s * a_i, b_i).
template <class T>
T sum_scaled_min(const T& s, std::span<const T> a, std::span<const T> b) {
  std::array<T, 4> lanes{T(0), T(0), T(0), T(0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    T sa = s * a[i];
    lanes[i % 4] += (b[i] < sa) ? b[i] : sa;
  }
  return combine_lanes(lanes);
}

// Sum of [s * a_i - b_i]_+.
template <class T>
T sum_scaled_pos(const T& s, std::span<const T> a, std::span<const T> b) {
  std::array<T, 4> lanes{T(0), T(0), T(0), T(0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    T d = s * a[i] - b[i];
    lanes[i % 4] += (T(0) < d) ? d : T(0);
  }
  return combine_lanes(lanes);
}

// out_i = [s * a_i - b_i]_+, returns the sum of out.
template <class T>
T scaled_pos(const T& s, std::span<const T> a, std::span<const T> b,
             std::span<T> out) {
  std::array<T, 4> lanes{T(0), T(0), T(0), T(0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    T d = s * a[i] - b[i];
    out[i] = (T(0) < d) ? d : T(0);
    lanes[i % 4] += out[i];
  }
  return combine_lanes(lanes);
}

template <class T>
void divide(std::span<T> a, const T& s) {
  for (auto& x : a) x = x / s;
}

}  // namespace ref

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  double (*sum)(const double* a, std::size_t n);
  double (*sum_min)(const double* a, const double* b, std::size_t n);
  double (*sum_scaled_min)(double s, const double* a, const double* b,
                           std::size_t n);
  double (*sum_scaled_pos)(double s, const double* a, const double* b,
                           std::size_t n);
  double (*scaled_pos)(double s, const double* a, const double* b, double* out,
                       std::size_t n);
  void (*divide)(double* a, double s, std::size_t n);
};

bool supported(Isa isa);
const KernelTable& table(Isa isa);

// The table chosen at first use: SPECVERIFY_KERNELS=scalar|avx2|auto
// (default auto, which picks the widest ISA the CPU reports).
const KernelTable& active();

// Overrides the active table; throws if the ISA is unsupported here.
void select(Isa isa);

template <class T>
T sum(std::span<const T> a) {
  if constexpr (std::is_same_v<T, double>) {
    return active().sum(a.data(), a.size());
  } else {
    return ref::sum(a);
  }
}

template <class T>
T sum_min(std::span<const T> a, std::span<const T> b) {
  if constexpr (std::is_same_v<T, double>) {
    return active().sum_min(a.data(), b.data(), a.size());
  } else {
    return ref::sum_min(a, b);
  }
}

template <class T>
T sum_scaled_min(const T& s, std::span<const T> a, std::span<const T> b) {
  if constexpr (std::is_same_v<T, double>) {
    return active().sum_scaled_min(s, a.data(), b.data(), a.size());
  } else {
    return ref::sum_scaled_min(s, a, b);
  }
}

template <class T>
T sum_scaled_pos(const T& s, std::span<const T> a, std::span<const T> b) {
  if constexpr (std::is_same_v<T, double>) {
    return active().sum_scaled_pos(s, a.data(), b.data(), a.size());
  } else {
    return ref::sum_scaled_pos(s, a, b);
  }
}

template <class T>
T scaled_pos(const T& s, std::span<const T> a, std::span<const T> b,
             std::span<T> out) {
  if constexpr (std::is_same_v<T, double>) {
    return active().scaled_pos(s, a.data(), b.data(), out.data(), a.size());
  } else {
    return ref::scaled_pos(s, a, b, out);
  }
}

template <class T>
void divide(std::span<T> a, const T& s) {
  if constexpr (std::is_same_v<T, double>) {
    active().divide(a.data(), s, a.size());
  } else {
    ref::divide(a, s);
  }
}

}  // namespace specverify::kernels
