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

// UniVer: top-down allocation of acceptance mass through the draft tree,
// followed by a single post-order decision scan.
//
// Per non-leaf node v with prefix acceptance probability p~ and children
// u_1..u_{m-1} (deterministic top tokens) and u_m (residual sample):
//
//   Z        = 1 - p~ + sum_x [p~ Mb(x) - Ms'(x)]_+
//   p(u_m)   = min(1, p~ Mb(u_m) / Ms'(u_m))
//   p(u)     = [p~ Mb(u) - Ms'(u)]_+ (1 - p(u_m)) / Z      for every u != u_m
//   p(not v) = (1 - p(u_m)) (1 - p~) / Z
//
// where Ms' is the draft distribution with the top tokens removed. Child j
// is then accepted with p(u_j) / (1 - sum_{i<j} p(u_i)), and v itself (with a
// bonus token from the residual marginals) with 1 - p(not v) / (residual mass
// + p(not v)).

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specverify/models.hpp"
#include "specverify/prob.hpp"
#include "specverify/rng.hpp"
#include "specverify/tree.hpp"

namespace specverify {

// Deliberate corruptions used to show the oracle is not vacuous.
enum class Mutation {
  kNone,
  kScalePTilde,         // first child of the root accepted at 0.9x its rate
  kSkipResidualRenorm,  // Ms' left unnormalized after removing top tokens
  kWrongZ,              // Z without the (1 - p~) term
};

std::string_view mutation_name(Mutation m);
Mutation parse_mutation(std::string_view name);

inline constexpr double kScalePTildeFactor = 0.9;

template <class T>
T normalization_factor(const T& p_tilde, const BasicDist<T>& target,
                       const BasicDist<T>& residual_draft) {
  require_same_vocab(target, residual_draft);
  return T(1) - p_tilde +
         kernels::sum_scaled_pos(p_tilde, target.probs(),
                                 residual_draft.probs());
}

// 1 - sum_{x not in top} min(p~ Mb(x), Ms'(x)); equal to normalization_factor
// whenever Ms' vanishes on the top tokens, and independent of the sample.
template <class T>
T normalization_factor_min_form(const T& p_tilde, const BasicDist<T>& target,
                                const BasicDist<T>& residual_draft,
                                std::span<const Token> top_tokens) {
  require_same_vocab(target, residual_draft);
  std::vector<T> a(target.probs().begin(), target.probs().end());
  std::vector<T> b(residual_draft.probs().begin(), residual_draft.probs().end());
  for (Token t : top_tokens) {
    a[static_cast<std::size_t>(t)] = T(0);
    b[static_cast<std::size_t>(t)] = T(0);
  }
  return T(1) - kernels::sum_scaled_min(p_tilde, std::span<const T>(a),
                                        std::span<const T>(b));
}

template <class T>
struct ChildAllocation {
  std::vector<T> marginals;  // p_v(u) over the whole vocabulary
  T reject_mass = T(0);      // p_v(not v)
  T z = T(0);
};

template <class T>
ChildAllocation<T> allocate_children(const T& p_tilde,
                                     const BasicDist<T>& target,
                                     const BasicDist<T>& draft,
                                     std::span<const Token> top_tokens,
                                     Token sampled,
                                     Mutation mutation = Mutation::kNone) {
  require_same_vocab(target, draft);
  const std::size_t vocab = target.size();
  if (sampled < 0 || static_cast<std::size_t>(sampled) >= vocab) {
    throw Error(ErrorCode::kBadSample, "sampled token out of range");
  }
  for (Token t : top_tokens) {
    if (t == sampled) {
      throw Error(ErrorCode::kBadSample, "sampled token is a top token");
    }
  }

  std::vector<T> residual_probs;
  if (mutation == Mutation::kSkipResidualRenorm) {
    residual_probs.assign(draft.probs().begin(), draft.probs().end());
    for (Token t : top_tokens) residual_probs[static_cast<std::size_t>(t)] = 0;
  } else {
    const auto residual = residual_without(draft, top_tokens);
    residual_probs.assign(residual.probs().begin(), residual.probs().end());
  }
  const std::span<const T> ms(residual_probs);
  const std::size_t um = static_cast<std::size_t>(sampled);
  if (!(ms[um] > T(0))) {
    throw Error(ErrorCode::kBadSample,
                "sampled token has zero residual draft mass");
  }

  const bool strict = mutation == Mutation::kNone;
  auto clamp = [strict](const T& x, const char* what) {
    return strict ? clamp_probability<T>(x, what) : saturate<T>(x);
  };
  ChildAllocation<T> out;
  out.marginals.assign(vocab, T(0));
  T ratio = p_tilde * target[sampled] / ms[um];
  const T p_um = ratio < T(1) ? ratio : T(1);

  std::vector<T> bracket(vocab);
  T bracket_sum = kernels::scaled_pos(p_tilde, target.probs(), ms,
                                      std::span<T>(bracket));
  out.z = (mutation == Mutation::kWrongZ) ? bracket_sum
                                          : T(1) - p_tilde + bracket_sum;
  // Z = 0 only when every bracket outside u_m vanishes and p(u_m) = 1.
  const T factor = out.z > T(0) ? (T(1) - p_um) / out.z : T(0);
  for (std::size_t x = 0; x < vocab; ++x) {
    out.marginals[x] =
        clamp(bracket[x] * factor, "marginal acceptance");
  }
  out.marginals[um] = clamp(p_um, "sampled acceptance");
  out.reject_mass = clamp(
      out.z > T(0) ? (T(1) - p_um) * (T(1) - p_tilde) / out.z : T(0),
      "reject mass");

  if (strict) {
    const T total = kernels::sum(std::span<const T>(out.marginals)) +
                    out.reject_mass;
    if constexpr (kIsExact<T>) {
      if (total != T(1)) {
        throw Error(ErrorCode::kInternalNumerical, "allocation mass != 1");
      }
    } else {
      if (std::abs(total - 1.0) > 1e-9) {
        throw Error(ErrorCode::kInternalNumerical,
                    "allocation mass " + std::to_string(total));
      }
    }
  }
  return out;
}

template <class T>
struct ConditionalChain {
  std::vector<T> child_probs;  // p~_{u_j}, sibling order
  T fallback = T(1);           // p~_v^res
};

// child j: p(u_j) / (1 - sum_{i<j} p(u_i)), 0/0 -> 0.
// fallback: residual / (residual + reject), where residual is the marginal
// mass outside the children; 1 when both vanish, 0 when only the residual
// does. For j > 0 strict chains take 1 - sum_{i<j} p(u_i) as the mass still
// unclaimed (later children + residual + reject), which is the same number
// when the plan sums to 1 but never rounds below p(u_j). Non-strict chains use the
// literal form and saturate instead of throwing.
template <class T>
ConditionalChain<T> conditional_chain(std::span<const T> marginals,
                                      std::span<const Token> children,
                                      const T& reject_mass,
                                      bool strict = true) {
  auto clamp = [strict](const T& x, const char* what) {
    return strict ? clamp_probability<T>(x, what) : saturate<T>(x);
  };
  ConditionalChain<T> out;
  std::vector<T> outside(marginals.begin(), marginals.end());
  for (Token u : children) outside[static_cast<std::size_t>(u)] = T(0);
  const T residual = kernels::sum(std::span<const T>(outside));

  std::vector<T> unclaimed(children.size() + 1);
  unclaimed[children.size()] = residual + reject_mass;
  for (std::size_t j = children.size(); j-- > 0;) {
    unclaimed[j] =
        unclaimed[j + 1] + marginals[static_cast<std::size_t>(children[j])];
  }
  out.child_probs.reserve(children.size());
  T consumed = T(0);
  for (std::size_t j = 0; j < children.size(); ++j) {
    const T denom = (strict && j > 0) ? unclaimed[j] : T(1) - consumed;
    const T p = marginals[static_cast<std::size_t>(children[j])];
    out.child_probs.push_back(
        clamp(denom > T(0) ? p / denom : T(0), "conditional acceptance"));
    consumed += p;
  }
  const T denom = residual + reject_mass;
  out.fallback =
      clamp(denom > T(0) ? residual / denom : T(1), "fallback probability");
  return out;
}

// One node's complete verification plan: what the allocation phase stores.
template <class T>
struct NodePlan {
  std::vector<T> marginals;
  T reject_mass = T(0);
  T z = T(0);
  std::vector<T> child_probs;
  T fallback = T(1);
  // Residual bonus distribution; absent when no residual mass remains.
  std::optional<BasicDist<T>> bonus;
};

template <class T>
std::optional<BasicDist<T>> residual_bonus(std::span<const T> marginals,
                                           std::span<const Token> children) {
  std::vector<T> w(marginals.begin(), marginals.end());
  for (Token u : children) w[static_cast<std::size_t>(u)] = T(0);
  if (!(kernels::sum(std::span<const T>(w)) > T(0))) return std::nullopt;
  return normalize(std::move(w));
}

// The UniVer node plan. `mutate_here` marks the node a kScalePTilde mutation
// corrupts.
template <class T>
NodePlan<T> ot_plan(const T& p_tilde, const BasicDist<T>& target,
                    const BasicDist<T>& draft, std::span<const Token> children,
                    Mutation mutation = Mutation::kNone,
                    bool mutate_here = false) {
  const auto top = children.first(children.size() - 1);
  auto alloc = allocate_children<T>(p_tilde, target, draft, top,
                                    children.back(), mutation);
  auto chain = conditional_chain<T>(alloc.marginals, children,
                                    alloc.reject_mass,
                                    mutation == Mutation::kNone);
  if (mutation == Mutation::kScalePTilde && mutate_here) {
    chain.child_probs.front() *= T(kScalePTildeFactor);
  }
  NodePlan<T> plan;
  plan.bonus = residual_bonus<T>(alloc.marginals, children);
  plan.marginals = std::move(alloc.marginals);
  plan.reject_mass = alloc.reject_mass;
  plan.z = alloc.z;
  plan.child_probs = std::move(chain.child_probs);
  plan.fallback = chain.fallback;
  return plan;
}

struct AllocatedNode {
  double p_tilde = 0.0;  // this node's own acceptance probability
  // Non-leaf only.
  std::vector<double> marginals;
  double reject_mass = 0.0;
  double z = 0.0;
  std::vector<double> cond_child_probs;
  double fallback_prob = 1.0;
  std::optional<Dist> residual_bonus_dist;
  std::optional<Dist> target_dist;
};

// Plan for one node given (p~, target dist, draft dist, children, node index).
using PlanFn = std::function<NodePlan<double>(
    double, const Dist&, const Dist&, std::span<const Token>, std::size_t)>;

struct AllocatedTree {
  const DraftTree* tree = nullptr;
  ConditionalModel target;
  std::vector<AllocatedNode> nodes;  // parallel to tree->nodes
};

// Generic top-down allocation: the root gets root_p_tilde; every child's
// acceptance probability is its conditional from the parent's plan.
AllocatedTree allocate_tree_with(const DraftTree& tree,
                                 const ConditionalModel& target,
                                 const PlanFn& plan, double root_p_tilde = 1.0);

AllocatedTree allocate_tree(const DraftTree& tree,
                            const ConditionalModel& target,
                            Mutation mutation = Mutation::kNone,
                            double root_p_tilde = 1.0);

struct Outcome {
  TokenSeq accepted;  // draft tokens accepted, anchor excluded
  Token bonus_token = -1;
  std::size_t stop_node = 0;
  std::size_t accepted_count() const { return accepted.size(); }
};

// The acceptance threshold the decision scan uses at a node: p~ for leaves,
// the fallback probability otherwise.
double decision_threshold(const AllocatedTree& at, std::size_t node);

// Draws |T| uniforms indexed by post-order position, scans in post order and
// stops at the first node whose uniform falls below its threshold; one more
// uniform draws the bonus token. NoAcceptance when nothing is accepted (only
// possible with a root acceptance probability below 1).
Outcome decide(const AllocatedTree& at, UniformStream& rng);

Outcome verify_univer(const ConditionalModel& target,
                      const ConditionalModel& draft, const Topology& topo,
                      std::span<const Token> prefix, UniformStream& rng);

}  // namespace specverify
