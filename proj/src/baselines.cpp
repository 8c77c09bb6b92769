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

#include "specverify/baselines.hpp"

#include <algorithm>
#include <sstream>

namespace specverify {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kUniver:
      return "univer";
    case Method::kRrsw:
      return "rrsw";
    case Method::kGreedy:
      return "greedy";
    case Method::kTraversal:
      return "traversal";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m :
       {Method::kUniver, Method::kRrsw, Method::kGreedy, Method::kTraversal}) {
    if (method_name(m) == name) return m;
  }
  throw Error(ErrorCode::kBadConfig,
              "method: unknown method '" + std::string(name) +
                  "' (expected univer, rrsw, greedy or traversal)");
}

std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw Error(ErrorCode::kBadConfig, "method: empty list");
  return out;
}

DraftStrategy drafting_strategy(Method) { return DraftStrategy::kGreedy; }

void require_compatible(Method m, DraftStrategy s) {
  if (s != DraftStrategy::kGreedy &&
      (m == Method::kUniver || m == Method::kGreedy)) {
    throw Error(ErrorCode::kBadConfig,
                "drafting: " + std::string(method_name(m)) +
                    " needs greedy drafting");
  }
}

bool is_two_stage(Method m) {
  return m == Method::kUniver || m == Method::kTraversal;
}

SingleVerdict verify_single(const Dist& p, const Dist& q, Token t, double u) {
  require_same_vocab(p, q);
  if (t < 0 || static_cast<std::size_t>(t) >= q.size() || !(q[t] > 0.0)) {
    throw Error(ErrorCode::kBadToken, "draft token has zero draft mass");
  }
  SingleVerdict v;
  v.accept_prob = std::min(1.0, p[t] / q[t]);
  v.accepted = u < v.accept_prob;
  if (!v.accepted) {
    std::vector<double> diff(p.size());
    const double kept =
        kernels::scaled_pos(1.0, p.probs(), q.probs(), std::span<double>(diff));
    if (kept > 0.0) v.residual = normalize(std::move(diff));
  }
  return v;
}

RrswVerdict rrsw_node(const Dist& p, const Dist& q,
                      std::span<const Token> candidates, UniformStream& rng) {
  require_same_vocab(p, q);
  std::vector<Dist> proposals;
  proposals.reserve(candidates.size());
  proposals.push_back(q);
  for (std::size_t j = 1; j < candidates.size(); ++j) {
    std::vector<double> w(proposals.back().probs().begin(),
                          proposals.back().probs().end());
    w[static_cast<std::size_t>(candidates[j - 1])] = 0.0;
    // Once q is exhausted the remaining candidates can only be rejected,
    // which leaves the residual unchanged.
    if (!(kernels::sum(std::span<const double>(w)) > 0.0)) break;
    proposals.push_back(normalize(std::move(w)));
  }
  return rrsw_node_with(p, proposals, candidates.first(proposals.size()), rng);
}

RrswVerdict rrsw_node_with(const Dist& p, std::span<const Dist> proposals,
                           std::span<const Token> candidates,
                           UniformStream& rng) {
  const std::size_t vocab = p.size();
  std::vector<double> pr(p.probs().begin(), p.probs().end());
  std::vector<double> diff(vocab);
  RrswVerdict out;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const Dist& q = proposals[j];
    require_same_vocab(p, q);
    const Token t = candidates[j];
    // 0/0 (exhausted proposal or target) counts as a rejection.
    const double ratio = q[t] > 0.0 ? pr[static_cast<std::size_t>(t)] / q[t]
                                    : 0.0;
    if (rng() < std::min(1.0, ratio)) {
      out.accepted_index = j;
      out.accepted_token = t;
      return out;
    }
    const double kept = kernels::scaled_pos(1.0, std::span<const double>(pr),
                                            q.probs(), std::span<double>(diff));
    if (kept > 0.0) {
      for (std::size_t x = 0; x < vocab; ++x) pr[x] = diff[x] / kept;
    }
  }
  out.residual = normalize(std::move(pr));
  return out;
}

namespace {

std::vector<Token> child_tokens(const DraftTree& tree, std::size_t node) {
  std::vector<Token> out;
  for (std::size_t c : tree.nodes[node].children) {
    out.push_back(tree.nodes[c].token);
  }
  return out;
}

Outcome finish_at_leaf(const DraftTree& tree, std::size_t node,
                       const ConditionalModel& target, UniformStream& rng) {
  Outcome out;
  out.stop_node = node;
  out.accepted = tree.nodes[node].path;
  out.bonus_token = sample(target.eval(tree.context(node)), rng());
  return out;
}

}  // namespace

Outcome verify_rrsw_tree(const ConditionalModel& target,
                         const ConditionalModel& draft, const Topology& topo,
                         std::span<const Token> prefix, UniformStream& rng,
                         DraftStrategy strategy) {
  const DraftTree tree = grow_tree(draft, topo, prefix, rng, strategy);
  std::size_t node = 0;
  while (!tree.nodes[node].is_leaf()) {
    const Dist p = target.eval(tree.context(node));
    const auto children = child_tokens(tree, node);
    const auto proposals =
        rrsw_proposals<double>(*tree.nodes[node].draft_dist, children, strategy);
    const auto verdict = rrsw_node_with(p, proposals, children, rng);
    if (!verdict.accepted_index) {
      Outcome out;
      out.stop_node = node;
      out.accepted = tree.nodes[node].path;
      out.bonus_token = sample(*verdict.residual, rng());
      return out;
    }
    node = tree.nodes[node].children[*verdict.accepted_index];
  }
  return finish_at_leaf(tree, node, target, rng);
}

Outcome verify_greedy_tree(const ConditionalModel& target,
                           const ConditionalModel& draft, const Topology& topo,
                           std::span<const Token> prefix, UniformStream& rng) {
  const DraftTree tree =
      grow_tree(draft, topo, prefix, rng, DraftStrategy::kGreedy);
  std::size_t node = 0;
  while (!tree.nodes[node].is_leaf()) {
    const Dist p = target.eval(tree.context(node));
    const auto children = child_tokens(tree, node);
    const auto plan =
        ot_plan<double>(1.0, p, *tree.nodes[node].draft_dist, children);
    std::optional<std::size_t> chosen;
    for (std::size_t j = 0; j < children.size(); ++j) {
      if (rng() < plan.child_probs[j]) {
        chosen = j;
        break;
      }
    }
    if (!chosen) {
      if (!plan.bonus) {
        throw Error(ErrorCode::kInternalNumerical,
                    "greedy fallback with no residual bonus mass");
      }
      Outcome out;
      out.stop_node = node;
      out.accepted = tree.nodes[node].path;
      out.bonus_token = sample(*plan.bonus, rng());
      return out;
    }
    node = tree.nodes[node].children[*chosen];
  }
  return finish_at_leaf(tree, node, target, rng);
}

AllocatedTree allocate_traversal_tree(const DraftTree& tree,
                                      const ConditionalModel& target,
                                      double root_p_tilde) {
  const DraftStrategy strategy = tree.strategy;
  PlanFn plan = [strategy](double p_tilde, const Dist& target_dist,
                           const Dist& draft_dist,
                           std::span<const Token> children, std::size_t) {
    return rrsw_plan<double>(p_tilde, target_dist, draft_dist, children,
                             strategy);
  };
  return allocate_tree_with(tree, target, plan, root_p_tilde);
}

Outcome verify_traversal_tree(const ConditionalModel& target,
                              const ConditionalModel& draft,
                              const Topology& topo,
                              std::span<const Token> prefix,
                              UniformStream& rng, DraftStrategy strategy) {
  const DraftTree tree = grow_tree(draft, topo, prefix, rng, strategy);
  return decide(allocate_traversal_tree(tree, target), rng);
}

std::vector<double> local_chain_probs(std::span<const double> ratios) {
  std::vector<double> out;
  out.reserve(ratios.size());
  double p = 1.0;
  for (double r : ratios) {
    p *= std::min(r, 1.0);
    out.push_back(p);
  }
  return out;
}

std::vector<double> block_chain_probs(std::span<const double> ratios) {
  std::vector<double> out;
  out.reserve(ratios.size());
  double p = 1.0;
  for (double r : ratios) {
    p = std::min(r * p, 1.0);
    out.push_back(p);
  }
  return out;
}

Outcome verify(Method method, const ConditionalModel& target,
               const ConditionalModel& draft, const Topology& topo,
               std::span<const Token> prefix, UniformStream& rng,
               DraftStrategy strategy) {
  require_compatible(method, strategy);
  switch (method) {
    case Method::kUniver:
      return verify_univer(target, draft, topo, prefix, rng);
    case Method::kRrsw:
      return verify_rrsw_tree(target, draft, topo, prefix, rng, strategy);
    case Method::kGreedy:
      return verify_greedy_tree(target, draft, topo, prefix, rng);
    case Method::kTraversal:
      return verify_traversal_tree(target, draft, topo, prefix, rng, strategy);
  }
  throw Error(ErrorCode::kBadConfig, "unknown method");
}

}  // namespace specverify
