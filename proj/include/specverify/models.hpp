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

// Synthetic target/draft conditional models with controllable alignment.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specverify/prob.hpp"

namespace specverify {

enum class ModelFamily { kSeededRandom, kMarkov1 };

std::string_view family_name(ModelFamily family);
ModelFamily parse_family(std::string_view name);

struct ModelPairConfig {
  std::size_t vocab_size = 8;
  ModelFamily family = ModelFamily::kSeededRandom;
  std::uint64_t seed = 0;
  // Draft = (1 - epsilon) * target + epsilon * independent noise.
  double epsilon = 0.5;
  double temperature = 1.0;
  // Larger concentration flattens the per-prefix distributions.
  double concentration = 1.0;
  // Small-integer weights so every distribution is an exact rational; needed
  // for eval_exact. Requires temperature == 1.
  bool exact_weights = false;

  // Throws BadConfig naming the offending field.
  void validate() const;
};

// Maps an accepted prefix to a next-token distribution. Immutable; copies
// share state.
class ConditionalModel {
 public:
  enum class Kind { kSeededRandom, kMarkov1, kMixtureOfTarget, kCustom };

  using EvalFn = std::function<Dist(std::span<const Token>)>;
  using ExactEvalFn = std::function<ExactDist(std::span<const Token>)>;

  // Hand-written model, mostly for tests. `exact_fn` may be empty.
  static ConditionalModel custom(std::size_t vocab, EvalFn fn,
                                 ExactEvalFn exact_fn = {});

  Dist eval(std::span<const Token> prefix) const;
  Dist eval(std::initializer_list<Token> prefix) const {
    return eval(std::span<const Token>(prefix.begin(), prefix.size()));
  }
  // Exact rational evaluation; ExactModeUnavailable unless built with
  // exact_weights.
  ExactDist eval_exact(std::span<const Token> prefix) const;

  template <class T>
  BasicDist<T> eval_as(std::span<const Token> prefix) const {
    if constexpr (kIsExact<T>) {
      return eval_exact(prefix);
    } else {
      return eval(prefix);
    }
  }

  Vocab vocab() const;
  Kind kind() const;
  std::string_view kind_name() const;
  bool exact() const;

  struct State;

 private:
  explicit ConditionalModel(std::shared_ptr<const State> state)
      : state_(std::move(state)) {}
  friend std::pair<ConditionalModel, ConditionalModel> make_pair(
      const ModelPairConfig& cfg);

  std::shared_ptr<const State> state_;
};

struct ModelPair {
  ConditionalModel target;
  ConditionalModel draft;
};

// Target: the configured family at the configured temperature. Draft:
// temperature applied to the per-prefix mixture of the untempered target and
// an independent noise model of the same family.
std::pair<ConditionalModel, ConditionalModel> make_pair(
    const ModelPairConfig& cfg);

inline ModelPair make_model_pair(const ModelPairConfig& cfg) {
  auto [target, draft] = make_pair(cfg);
  return ModelPair{std::move(target), std::move(draft)};
}

// Stable 64-bit hash of (seed, length, tokens); part of the model contract,
// so golden outputs reproduce across platforms.
std::uint64_t prefix_hash(std::uint64_t seed, std::span<const Token> prefix);

}  // namespace specverify
