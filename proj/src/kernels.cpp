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

#include "specverify/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "specverify/error.hpp"

namespace specverify::kernels {

#if defined(__x86_64__) || defined(_M_X64)
// Defined in kernels_avx2.cpp, compiled with -mavx2.
extern const KernelTable kAvx2Table;
#endif

namespace {

double scalar_sum(const double* a, std::size_t n) {
  return ref::sum(std::span<const double>(a, n));
}
double scalar_sum_min(const double* a, const double* b, std::size_t n) {
  return ref::sum_min(std::span<const double>(a, n),
                      std::span<const double>(b, n));
}
double scalar_sum_scaled_min(double s, const double* a, const double* b,
                             std::size_t n) {
  return ref::sum_scaled_min(s, std::span<const double>(a, n),
                             std::span<const double>(b, n));
}
double scalar_sum_scaled_pos(double s, const double* a, const double* b,
                             std::size_t n) {
  return ref::sum_scaled_pos(s, std::span<const double>(a, n),
                             std::span<const double>(b, n));
}
double scalar_scaled_pos(double s, const double* a, const double* b,
                         double* out, std::size_t n) {
  return ref::scaled_pos(s, std::span<const double>(a, n),
                         std::span<const double>(b, n),
                         std::span<double>(out, n));
}
void scalar_divide(double* a, double s, std::size_t n) {
  ref::divide(std::span<double>(a, n), s);
}

const KernelTable kScalarTable{
    Isa::kScalar,          scalar_sum,        scalar_sum_min,
    scalar_sum_scaled_min, scalar_sum_scaled_pos, scalar_scaled_pos,
    scalar_divide,
};

const KernelTable* pick_default() {
  const char* env = std::getenv("SPECVERIFY_KERNELS");
  std::string choice = env ? env : "auto";
  if (choice == "scalar") return &kScalarTable;
  if (choice == "avx2") return &table(Isa::kAvx2);
  if (supported(Isa::kAvx2)) return &table(Isa::kAvx2);
  return &kScalarTable;
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw Error(ErrorCode::kBadConfig,
                "kernel ISA not supported on this CPU: " +
                    std::string(isa_name(isa)));
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const KernelTable* picked = pick_default();
    g_active.compare_exchange_strong(t, picked, std::memory_order_acq_rel);
    t = g_active.load(std::memory_order_acquire);
  }
  return *t;
}

void select(Isa isa) { g_active.store(&table(isa), std::memory_order_release); }

}  // namespace specverify::kernels
