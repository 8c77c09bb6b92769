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

#include "specverify/models.hpp"

#include <cmath>
#include <string>

#include "specverify/rng.hpp"

namespace specverify {

namespace {

constexpr std::uint64_t kNoiseSalt = 0x6e6f6973652d6d31ULL;
constexpr std::uint64_t kTokenSalt = 0x746f6b656e2d7331ULL;
constexpr std::uint64_t kInitialRowState = ~std::uint64_t{0};
constexpr int kExactWeightLevels = 8;

// Approximately standard normal value from one 64-bit hash: the centred sum
// of four 16-bit uniforms (Irwin-Hall) rescaled to unit variance.
double hashed_gaussian(std::uint64_t h) {
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    total += (static_cast<double>((h >> (16 * k)) & 0xFFFF) + 0.5) / 65536.0;
  }
  return (total - 2.0) * 1.7320508075688772;
}

std::uint64_t token_hash(std::uint64_t state_hash, std::size_t token) {
  return mix64(state_hash ^ mix64(token + kTokenSalt));
}

Rational exact_epsilon(double epsilon) {
  return Rational(static_cast<long long>(std::llround(epsilon * 1e6)),
                  1000000LL);
}

// One family instance: turns a prefix into positive weights.
struct Generator {
  ModelFamily family = ModelFamily::kSeededRandom;
  std::uint64_t seed = 0;
  double concentration = 1.0;
  bool exact = false;
  std::size_t vocab = 0;

  std::uint64_t state_hash(std::span<const Token> prefix) const {
    if (family == ModelFamily::kMarkov1) {
      const std::uint64_t state =
          prefix.empty() ? kInitialRowState
                         : static_cast<std::uint64_t>(prefix.back());
      return mix64(seed ^ mix64(state));
    }
    return prefix_hash(seed, prefix);
  }

  // Weights proportional to exp(g / (concentration * temperature)).
  std::vector<double> weights(std::span<const Token> prefix,
                              double temperature) const {
    const std::uint64_t h = state_hash(prefix);
    std::vector<double> w(vocab);
    if (exact) {
      for (std::size_t i = 0; i < vocab; ++i) {
        w[i] = static_cast<double>(1 + token_hash(h, i) % kExactWeightLevels);
      }
      return w;
    }
    const double scale = 1.0 / (concentration * temperature);
    for (std::size_t i = 0; i < vocab; ++i) {
      w[i] = std::exp(hashed_gaussian(token_hash(h, i)) * scale);
    }
    return w;
  }

  std::vector<Rational> exact_weights(std::span<const Token> prefix) const {
    const std::uint64_t h = state_hash(prefix);
    std::vector<Rational> w(vocab);
    for (std::size_t i = 0; i < vocab; ++i) {
      w[i] = Rational(static_cast<long long>(
          1 + token_hash(h, i) % kExactWeightLevels));
    }
    return w;
  }
};

}  // namespace

struct ConditionalModel::State {
  Kind kind = Kind::kSeededRandom;
  std::size_t vocab = 0;
  double temperature = 1.0;
  double epsilon = 0.0;
  Rational epsilon_exact;
  bool exact = false;
  Generator primary;
  Generator noise;
  EvalFn custom;
  ExactEvalFn custom_exact;

  Dist target_eval(std::span<const Token> prefix) const {
    return normalize(primary.weights(prefix, temperature));
  }

  Dist mixture_eval(std::span<const Token> prefix) const {
    if (epsilon == 0.0) return target_eval(prefix);
    const Dist t = normalize(primary.weights(prefix, 1.0));
    const Dist n = normalize(noise.weights(prefix, 1.0));
    std::vector<double> mix(vocab);
    for (std::size_t i = 0; i < vocab; ++i) {
      const auto tok = static_cast<Token>(i);
      mix[i] = (1.0 - epsilon) * t[tok] + epsilon * n[tok];
    }
    return apply_temperature(normalize(std::move(mix)), temperature);
  }

  ExactDist exact_target(std::span<const Token> prefix) const {
    return normalize(primary.exact_weights(prefix));
  }

  ExactDist exact_mixture(std::span<const Token> prefix) const {
    if (epsilon == 0.0) return exact_target(prefix);
    const ExactDist t = exact_target(prefix);
    const ExactDist n = normalize(noise.exact_weights(prefix));
    std::vector<Rational> mix(vocab);
    const Rational keep = Rational(1) - epsilon_exact;
    for (std::size_t i = 0; i < vocab; ++i) {
      const auto tok = static_cast<Token>(i);
      mix[i] = keep * t[tok] + epsilon_exact * n[tok];
    }
    return normalize(std::move(mix));
  }
};

std::string_view family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::kSeededRandom:
      return "seeded-random";
    case ModelFamily::kMarkov1:
      return "markov1";
  }
  return "unknown";
}

ModelFamily parse_family(std::string_view name) {
  if (name == "seeded-random") return ModelFamily::kSeededRandom;
  if (name == "markov1") return ModelFamily::kMarkov1;
  throw Error(ErrorCode::kBadConfig,
              "model.family: unknown family '" + std::string(name) + "'");
}

void ModelPairConfig::validate() const {
  if (vocab_size < 2) {
    throw Error(ErrorCode::kBadConfig, "model.vocab: must be >= 2");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::kBadConfig, "model.epsilon: must lie in [0, 1]");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kBadConfig, "model.temperature: must be > 0");
  }
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw Error(ErrorCode::kBadConfig, "model.concentration: must be > 0");
  }
  if (exact_weights && temperature != 1.0) {
    throw Error(ErrorCode::kBadConfig,
                "model.temperature: exact weights require temperature 1");
  }
}

std::uint64_t prefix_hash(std::uint64_t seed, std::span<const Token> prefix) {
  std::uint64_t h = mix64(seed ^ mix64(prefix.size()));
  for (Token t : prefix) {
    h = mix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)) +
                   0x9e3779b97f4a7c15ULL));
  }
  return h;
}

std::pair<ConditionalModel, ConditionalModel> make_pair(
    const ModelPairConfig& cfg) {
  cfg.validate();
  Generator primary;
  primary.family = cfg.family;
  primary.seed = cfg.seed;
  primary.concentration = cfg.concentration;
  primary.exact = cfg.exact_weights;
  primary.vocab = cfg.vocab_size;
  Generator noise = primary;
  noise.seed = derive_seed(cfg.seed, kNoiseSalt);

  auto target = std::make_shared<ConditionalModel::State>();
  target->kind = cfg.family == ModelFamily::kMarkov1
                     ? ConditionalModel::Kind::kMarkov1
                     : ConditionalModel::Kind::kSeededRandom;
  target->vocab = cfg.vocab_size;
  target->temperature = cfg.temperature;
  target->exact = cfg.exact_weights;
  target->primary = primary;

  auto draft = std::make_shared<ConditionalModel::State>(*target);
  draft->kind = ConditionalModel::Kind::kMixtureOfTarget;
  draft->epsilon = cfg.epsilon;
  draft->epsilon_exact = exact_epsilon(cfg.epsilon);
  draft->noise = noise;

  return {ConditionalModel(std::move(target)), ConditionalModel(std::move(draft))};
}

namespace {

void check_prefix(std::span<const Token> prefix, std::size_t vocab) {
  for (Token t : prefix) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw Error(ErrorCode::kTokenOutOfRange,
                  "token " + std::to_string(t) + " outside vocabulary of " +
                      std::to_string(vocab));
    }
  }
}

}  // namespace

ConditionalModel ConditionalModel::custom(std::size_t vocab, EvalFn fn,
                                          ExactEvalFn exact_fn) {
  auto state = std::make_shared<State>();
  state->kind = Kind::kCustom;
  state->vocab = vocab;
  state->exact = static_cast<bool>(exact_fn);
  state->custom = std::move(fn);
  state->custom_exact = std::move(exact_fn);
  return ConditionalModel(std::move(state));
}

Dist ConditionalModel::eval(std::span<const Token> prefix) const {
  check_prefix(prefix, state_->vocab);
  if (state_->kind == Kind::kCustom) {
    Dist d = state_->custom(prefix);
    if (d.size() != state_->vocab) {
      throw Error(ErrorCode::kVocabMismatch, "custom model vocabulary");
    }
    return d;
  }
  if (state_->kind == Kind::kMixtureOfTarget) {
    return state_->mixture_eval(prefix);
  }
  return state_->target_eval(prefix);
}

ExactDist ConditionalModel::eval_exact(std::span<const Token> prefix) const {
  if (!state_->exact) {
    throw Error(ErrorCode::kExactModeUnavailable,
                "model was not built with exact weights");
  }
  check_prefix(prefix, state_->vocab);
  if (state_->kind == Kind::kCustom) return state_->custom_exact(prefix);
  if (state_->kind == Kind::kMixtureOfTarget) {
    return state_->exact_mixture(prefix);
  }
  return state_->exact_target(prefix);
}

Vocab ConditionalModel::vocab() const { return Vocab{state_->vocab}; }
ConditionalModel::Kind ConditionalModel::kind() const { return state_->kind; }
bool ConditionalModel::exact() const { return state_->exact; }

std::string_view ConditionalModel::kind_name() const {
  switch (state_->kind) {
    case Kind::kSeededRandom:
      return "seeded-random";
    case Kind::kMarkov1:
      return "markov1";
    case Kind::kMixtureOfTarget:
      return "mixture-of-target";
    case Kind::kCustom:
      return "custom";
  }
  return "unknown";
}

}  // namespace specverify
