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

// Finite-vocabulary probability primitives.
//
// BasicDist<T> is instantiated with double for simulation and with Rational
// for the exact oracle; every operation below is written once for both.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "specverify/error.hpp"
#include "specverify/kernels.hpp"

namespace specverify {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;
using Rational = boost::multiprecision::cpp_rational;

struct Vocab {
  std::size_t size = 0;
  friend bool operator==(Vocab, Vocab) = default;
};

// Numeric hygiene bands for double-valued distributions.
inline constexpr double kClampNegative = 1e-12;
inline constexpr double kSumExact = 1e-12;
inline constexpr double kSumRenormalize = 1e-6;

template <class T>
inline constexpr bool kIsExact = !std::is_floating_point_v<T>;

template <class T>
double to_double(const T& x) {
  if constexpr (std::is_floating_point_v<T>) {
    return static_cast<double>(x);
  } else {
    return x.template convert_to<double>();
  }
}

template <class T>
class BasicDist {
 public:
  BasicDist() = default;

  // Validates probs. Doubles: entries in [-1e-12, 0) clamp to 0 and a sum off
  // by at most 1e-6 is renormalized; anything worse is InvalidDist. Exact
  // types must sum to exactly 1.
  static BasicDist from_probs(std::vector<T> probs) {
    if (probs.empty()) {
      throw Error(ErrorCode::kInvalidDist, "empty probability vector");
    }
    for (auto& p : probs) {
      if (p < T(0)) {
        if constexpr (!kIsExact<T>) {
          if (p >= -kClampNegative) {
            p = 0;
            continue;
          }
        }
        throw Error(ErrorCode::kInvalidDist,
                    "negative probability " + std::to_string(to_double(p)));
      }
    }
    T total = kernels::sum(std::span<const T>(probs));
    if constexpr (kIsExact<T>) {
      if (total != T(1)) {
        throw Error(ErrorCode::kInvalidDist, "exact probabilities must sum to 1");
      }
    } else {
      const double err = std::abs(total - 1.0);
      if (err > kSumRenormalize || !std::isfinite(total)) {
        throw Error(ErrorCode::kInvalidDist,
                    "probabilities sum to " + std::to_string(total));
      }
      if (err > kSumExact) kernels::divide(std::span<T>(probs), total);
    }
    return BasicDist(std::move(probs));
  }

  std::size_t size() const { return probs_.size(); }
  Vocab vocab() const { return Vocab{probs_.size()}; }
  bool empty() const { return probs_.empty(); }
  const T& operator[](Token t) const {
    return probs_[static_cast<std::size_t>(t)];
  }
  std::span<const T> probs() const { return probs_; }

  std::vector<Token> support() const {
    std::vector<Token> out;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (probs_[i] > T(0)) out.push_back(static_cast<Token>(i));
    }
    return out;
  }
  std::size_t support_size() const {
    return static_cast<std::size_t>(std::count_if(
        probs_.begin(), probs_.end(), [](const T& p) { return p > T(0); }));
  }

  friend bool operator==(const BasicDist&, const BasicDist&) = default;

 private:
  explicit BasicDist(std::vector<T> probs) : probs_(std::move(probs)) {}

  std::vector<T> probs_;
};

using Dist = BasicDist<double>;
using ExactDist = BasicDist<Rational>;

template <class T>
void require_same_vocab(const BasicDist<T>& a, const BasicDist<T>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kVocabMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

template <class T>
BasicDist<T> normalize(std::vector<T> weights) {
  for (auto& w : weights) {
    if (w < T(0)) {
      if constexpr (!kIsExact<T>) {
        if (w >= -kClampNegative) {
          w = 0;
          continue;
        }
      }
      throw Error(ErrorCode::kInvalidDist, "negative weight");
    }
  }
  T total = kernels::sum(std::span<const T>(weights));
  if (!(total > T(0))) throw Error(ErrorCode::kZeroMass, "all weights are zero");
  kernels::divide(std::span<T>(weights), total);
  return BasicDist<T>::from_probs(std::move(weights));
}

// d with the excluded tokens removed and the rest renormalized.
template <class T>
BasicDist<T> residual_without(const BasicDist<T>& d,
                              std::span<const Token> excluded) {
  if (excluded.empty()) return d;
  std::vector<T> w(d.probs().begin(), d.probs().end());
  for (Token t : excluded) {
    if (t < 0 || static_cast<std::size_t>(t) >= w.size()) {
      throw Error(ErrorCode::kTokenOutOfRange, std::to_string(t));
    }
    w[static_cast<std::size_t>(t)] = T(0);
  }
  T total = kernels::sum(std::span<const T>(w));
  if (!(total > T(0))) {
    throw Error(ErrorCode::kZeroMass, "excluded tokens cover all mass");
  }
  kernels::divide(std::span<T>(w), total);
  return BasicDist<T>::from_probs(std::move(w));
}

template <class T>
BasicDist<T> residual_without(const BasicDist<T>& d,
                              std::initializer_list<Token> excluded) {
  return residual_without(d, std::span<const Token>(excluded.begin(),
                                                    excluded.size()));
}

// Sum over tokens of min(p, q).
template <class T>
T overlap(const BasicDist<T>& p, const BasicDist<T>& q) {
  require_same_vocab(p, q);
  return kernels::sum_min(p.probs(), q.probs());
}

// Highest-probability tokens, descending, lowest id first on ties; zero-mass
// tokens are never returned.
template <class T>
std::vector<Token> top_k(const BasicDist<T>& d, std::size_t k) {
  std::vector<Token> ids = d.support();
  k = std::min(k, ids.size());
  auto better = [&d](Token a, Token b) {
    if (d[a] != d[b]) return d[a] > d[b];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k),
                    ids.end(), better);
  ids.resize(k);
  return ids;
}

// Inverse-CDF draw in token-id order: the smallest token whose cumulative
// probability exceeds u. Rounding slack at the top end lands on the last
// token with positive mass.
template <class T>
Token sample(const BasicDist<T>& d, double u) {
  double cumulative = 0.0;
  Token last = -1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double p = to_double(d[static_cast<Token>(i)]);
    if (p <= 0.0) continue;
    last = static_cast<Token>(i);
    cumulative += p;
    if (cumulative > u) return last;
  }
  if (last < 0) throw Error(ErrorCode::kZeroMass, "sampling from empty dist");
  return last;
}

// Entries proportional to d^(1/temperature). Computed relative to the max
// entry so small temperatures approach the argmax point mass without
// underflowing to zero.
inline Dist apply_temperature(const Dist& d, double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kBadConfig, "temperature must be positive");
  }
  if (temperature == 1.0) return d;
  const auto probs = d.probs();
  const double peak = *std::max_element(probs.begin(), probs.end());
  const double exponent = 1.0 / temperature;
  std::vector<double> w(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    w[i] = probs[i] > 0.0 ? std::pow(probs[i] / peak, exponent) : 0.0;
  }
  return normalize(std::move(w));
}

// Clamp to [0, 1] without complaint; for deliberately corrupted plans.
template <class T>
T saturate(const T& x) {
  if (x < T(0)) return T(0);
  if (x > T(1)) return T(1);
  return x;
}

// Clamps a computed probability into [0, 1]; values further than 1e-9 outside
// the interval indicate a real defect and raise InternalNumerical.
template <class T>
T clamp_probability(const T& x, const char* what) {
  if constexpr (kIsExact<T>) {
    if (x < T(0) || x > T(1)) {
      throw Error(ErrorCode::kInternalNumerical, what);
    }
    return x;
  } else {
    constexpr double kSlack = 1e-9;
    if (!(x >= -kSlack && x <= 1.0 + kSlack)) {
      throw Error(ErrorCode::kInternalNumerical,
                  std::string(what) + " = " + std::to_string(x));
    }
    return std::clamp(x, 0.0, 1.0);
  }
}

}  // namespace specverify
