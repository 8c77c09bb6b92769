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

// Comparison verifiers: single-draft rejection sampling, recursive rejection
// sampling without replacement (RRSw), the per-node Greedy OT plan, chain
// probability recurrences, and a Traversal-style two-stage verifier.
//
// The four tree verifiers pair up:
//   greedy    = root-down walk, each node planned by the UniVer plan at p~ = 1
//   univer    = two-stage, UniVer plan with propagated p~
//   rrsw      = root-down walk, each node planned by RRSw at p~ = 1
//   traversal = two-stage, RRSw against the p~-scaled target (augmented with
//               a "reject v" outcome of mass 1 - p~) with propagated p~
// By default every verifier sees the same Greedy-drafted trees. RRSw tests
// each candidate against the distribution it was drawn from (a point mass
// for the deterministic top tokens), which keeps it lossless; it also runs
// on trees drafted without replacement. The OT plans need Greedy drafting.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specverify/prob.hpp"
#include "specverify/tree.hpp"
#include "specverify/univer.hpp"

namespace specverify {

enum class Method { kUniver, kRrsw, kGreedy, kTraversal };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
std::vector<Method> parse_method_list(const std::string& csv);
// Greedy for every method.
DraftStrategy drafting_strategy(Method m);
// BadConfig unless the method can verify trees drafted with `s`.
void require_compatible(Method m, DraftStrategy s);
// True for verifiers that allocate top-down then scan in post order.
bool is_two_stage(Method m);

struct SingleVerdict {
  bool accepted = false;
  double accept_prob = 0.0;
  // Corrected target normalize([p - q]_+) when rejected.
  std::optional<Dist> residual;
};

// Accept t ~ q iff u < min(1, p(t) / q(t)). BadToken when q(t) == 0.
SingleVerdict verify_single(const Dist& p, const Dist& q, Token t, double u);

struct RrswVerdict {
  std::optional<std::size_t> accepted_index;
  Token accepted_token = -1;
  // Final residual target when every candidate was rejected.
  std::optional<Dist> residual;
};

// Candidates drawn without replacement from q, tested in order against the
// running residuals; one uniform per tested candidate.
RrswVerdict rrsw_node(const Dist& p, const Dist& q,
                      std::span<const Token> candidates, UniformStream& rng);

// Same, with candidate j tested against proposals[j].
RrswVerdict rrsw_node_with(const Dist& p, std::span<const Dist> proposals,
                           std::span<const Token> candidates,
                           UniformStream& rng);

// The distribution each candidate was actually drawn from, in child order.
// Greedy drafting: the Top_{m-1} tokens are point masses and the last child
// comes from the draft with them removed. Without replacement: the draft
// with all earlier candidates removed.
template <class T>
std::vector<BasicDist<T>> rrsw_proposals(const BasicDist<T>& draft,
                                         std::span<const Token> children,
                                         DraftStrategy strategy) {
  std::vector<BasicDist<T>> out;
  out.reserve(children.size());
  if (strategy == DraftStrategy::kGreedy) {
    for (std::size_t j = 0; j + 1 < children.size(); ++j) {
      std::vector<T> point(draft.size(), T(0));
      point[static_cast<std::size_t>(children[j])] = T(1);
      out.push_back(BasicDist<T>::from_probs(std::move(point)));
    }
    out.push_back(residual_without<T>(draft, children.first(children.size() - 1)));
    return out;
  }
  out.push_back(draft);
  for (std::size_t j = 1; j < children.size(); ++j) {
    const Token drop[1] = {children[j - 1]};
    out.push_back(residual_without<T>(out.back(), std::span<const Token>(drop)));
  }
  return out;
}

// Closed-form probabilities of RRSw at one node against the target p~ Mb
// augmented with "reject v" (mass 1 - p~). Candidate j is tested against
// proposals[j].
template <class T>
NodePlan<T> rrsw_plan_with(const T& p_tilde, const BasicDist<T>& target,
                           std::span<const BasicDist<T>> proposals,
                           std::span<const Token> children) {
  const std::size_t vocab = target.size();
  std::vector<T> p(vocab);
  for (std::size_t x = 0; x < vocab; ++x) {
    p[x] = p_tilde * target[static_cast<Token>(x)];
  }
  T p_reject = T(1) - p_tilde;
  std::vector<T> diff(vocab);
  T reach = T(1);

  NodePlan<T> plan;
  plan.marginals.assign(vocab, T(0));
  for (std::size_t j = 0; j < children.size(); ++j) {
    const auto c = static_cast<std::size_t>(children[j]);
    if (!(reach > T(0))) {
      plan.child_probs.push_back(T(0));
      continue;
    }
    const BasicDist<T>& q = proposals[j];
    require_same_vocab(target, q);
    if (!(q[children[j]] > T(0))) {
      throw Error(ErrorCode::kBadSample,
                  "candidate has zero mass under its proposal");
    }
    const T ratio = p[c] / q[children[j]];
    const T acc = clamp_probability<T>(ratio < T(1) ? ratio : T(1),
                                       "rrsw acceptance");
    plan.child_probs.push_back(acc);
    plan.marginals[c] = reach * acc;
    if (acc == T(1)) {
      reach = T(0);
      continue;
    }
    reach *= T(1) - acc;
    const T kept =
        kernels::scaled_pos(T(1), std::span<const T>(p), q.probs(),
                            std::span<T>(diff)) +
        p_reject;
    for (std::size_t x = 0; x < vocab; ++x) p[x] = diff[x] / kept;
    p_reject /= kept;
  }

  if (reach > T(0)) {
    // Every candidate was rejected, and a candidate is only rejected when
    // p(c) < q(c), so the residual target is zero on all of them.
    std::vector<bool> is_child(vocab, false);
    for (Token c : children) is_child[static_cast<std::size_t>(c)] = true;
    for (std::size_t x = 0; x < vocab; ++x) {
      if (!is_child[x]) plan.marginals[x] = reach * p[x];
    }
    plan.reject_mass = reach * p_reject;
    const T kept = kernels::sum(std::span<const T>(p));
    plan.fallback = clamp_probability<T>(
        (kept + p_reject) > T(0) ? kept / (kept + p_reject) : T(1),
        "rrsw fallback");
  } else {
    plan.reject_mass = T(0);
    plan.fallback = T(1);
  }
  plan.bonus = residual_bonus<T>(plan.marginals, children);
  return plan;
}

template <class T>
NodePlan<T> rrsw_plan(const T& p_tilde, const BasicDist<T>& target,
                      const BasicDist<T>& draft,
                      std::span<const Token> children,
                      DraftStrategy strategy = DraftStrategy::kGreedy) {
  require_same_vocab(target, draft);
  const auto proposals = rrsw_proposals<T>(draft, children, strategy);
  return rrsw_plan_with<T>(p_tilde, target,
                           std::span<const BasicDist<T>>(proposals), children);
}

Outcome verify_rrsw_tree(const ConditionalModel& target,
                         const ConditionalModel& draft, const Topology& topo,
                         std::span<const Token> prefix, UniformStream& rng,
                         DraftStrategy strategy = DraftStrategy::kGreedy);

Outcome verify_greedy_tree(const ConditionalModel& target,
                           const ConditionalModel& draft, const Topology& topo,
                           std::span<const Token> prefix, UniformStream& rng);

// Experimental: see the header comment for the construction.
Outcome verify_traversal_tree(const ConditionalModel& target,
                              const ConditionalModel& draft,
                              const Topology& topo,
                              std::span<const Token> prefix,
                              UniformStream& rng,
                              DraftStrategy strategy = DraftStrategy::kGreedy);

// Uses the tree's own drafting strategy for the proposals.
AllocatedTree allocate_traversal_tree(const DraftTree& tree,
                                      const ConditionalModel& target,
                                      double root_p_tilde = 1.0);

// p_k = prod_{i<=k} min(r_i, 1)
std::vector<double> local_chain_probs(std::span<const double> ratios);
// p_0 = 1, p_k = min(r_k p_{k-1}, 1)
std::vector<double> block_chain_probs(std::span<const double> ratios);

Outcome verify(Method method, const ConditionalModel& target,
               const ConditionalModel& draft, const Topology& topo,
               std::span<const Token> prefix, UniformStream& rng,
               DraftStrategy strategy = DraftStrategy::kGreedy);

}  // namespace specverify
