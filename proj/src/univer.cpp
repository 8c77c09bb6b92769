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

#include "specverify/univer.hpp"

#include <string>

namespace specverify {

std::string_view mutation_name(Mutation m) {
  switch (m) {
    case Mutation::kNone:
      return "none";
    case Mutation::kScalePTilde:
      return "scale-ptilde";
    case Mutation::kSkipResidualRenorm:
      return "skip-renorm";
    case Mutation::kWrongZ:
      return "wrong-z";
  }
  return "unknown";
}

Mutation parse_mutation(std::string_view name) {
  for (Mutation m : {Mutation::kNone, Mutation::kScalePTilde,
                     Mutation::kSkipResidualRenorm, Mutation::kWrongZ}) {
    if (mutation_name(m) == name) return m;
  }
  throw Error(ErrorCode::kBadConfig,
              "mutate: unknown mutation '" + std::string(name) +
                  "' (expected scale-ptilde, skip-renorm or wrong-z)");
}

AllocatedTree allocate_tree_with(const DraftTree& tree,
                                 const ConditionalModel& target,
                                 const PlanFn& plan, double root_p_tilde) {
  AllocatedTree at{&tree, target, {}};
  at.nodes.resize(tree.nodes.size());
  at.nodes[0].p_tilde = root_p_tilde;
  TokenSeq context = tree.prefix;
  // Node indices are breadth-first, so each layer is finished before the
  // next one reads its p~ values.
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const DraftNode& node = tree.nodes[i];
    if (node.is_leaf()) continue;
    context.resize(tree.prefix.size());
    context.insert(context.end(), node.path.begin(), node.path.end());
    Dist target_dist = target.eval(context);

    std::vector<Token> children;
    children.reserve(node.children.size());
    for (std::size_t c : node.children) children.push_back(tree.nodes[c].token);

    AllocatedNode& out = at.nodes[i];
    auto p = plan(out.p_tilde, target_dist, *node.draft_dist, children, i);
    for (std::size_t j = 0; j < node.children.size(); ++j) {
      at.nodes[node.children[j]].p_tilde = p.child_probs[j];
    }
    out.marginals = std::move(p.marginals);
    out.reject_mass = p.reject_mass;
    out.z = p.z;
    out.cond_child_probs = std::move(p.child_probs);
    out.fallback_prob = p.fallback;
    out.residual_bonus_dist = std::move(p.bonus);
    out.target_dist = std::move(target_dist);
  }
  return at;
}

AllocatedTree allocate_tree(const DraftTree& tree,
                            const ConditionalModel& target, Mutation mutation,
                            double root_p_tilde) {
  PlanFn plan = [mutation](double p_tilde, const Dist& target_dist,
                           const Dist& draft_dist,
                           std::span<const Token> children, std::size_t node) {
    return ot_plan<double>(p_tilde, target_dist, draft_dist, children,
                           mutation, node == 0);
  };
  return allocate_tree_with(tree, target, plan, root_p_tilde);
}

double decision_threshold(const AllocatedTree& at, std::size_t node) {
  return at.tree->nodes[node].is_leaf() ? at.nodes[node].p_tilde
                                        : at.nodes[node].fallback_prob;
}

Outcome decide(const AllocatedTree& at, UniformStream& rng) {
  const DraftTree& tree = *at.tree;
  const auto order = post_order(tree);
  std::vector<double> eta(order.size());
  for (double& e : eta) e = rng();

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t v = order[pos];
    if (!(eta[pos] < decision_threshold(at, v))) continue;

    Outcome out;
    out.stop_node = v;
    out.accepted = tree.nodes[v].path;
    if (tree.nodes[v].is_leaf()) {
      const Dist target_dist = at.target.eval(tree.context(v));
      out.bonus_token = sample(target_dist, rng());
    } else {
      const auto& bonus = at.nodes[v].residual_bonus_dist;
      if (!bonus) {
        throw Error(ErrorCode::kInternalNumerical,
                    "fallback accepted with no residual bonus mass");
      }
      out.bonus_token = sample(*bonus, rng());
    }
    return out;
  }
  throw Error(ErrorCode::kNoAcceptance, "every node rejected");
}

Outcome verify_univer(const ConditionalModel& target,
                      const ConditionalModel& draft, const Topology& topo,
                      std::span<const Token> prefix, UniformStream& rng) {
  const DraftTree tree =
      grow_tree(draft, topo, prefix, rng, DraftStrategy::kGreedy);
  const AllocatedTree at = allocate_tree(tree, target);
  return decide(at, rng);
}

}  // namespace specverify
