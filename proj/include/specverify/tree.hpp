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

// Draft-tree growth and traversal.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specverify/models.hpp"
#include "specverify/prob.hpp"
#include "specverify/rng.hpp"

namespace specverify {

// Uniform branching per depth: widths[d] children under every depth-d node.
struct Topology {
  std::vector<std::size_t> widths;

  std::size_t depth() const { return widths.size(); }
  std::size_t node_count() const;
  // "2x2x2" style tag used in result tables.
  std::string tag() const;
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

Topology parse_topology(const std::string& tag);

// How the children of a node are drafted.
//  kGreedy: Top_{m-1} of the draft distribution, then one sample from the
//    residual with those tokens removed (one uniform per node).
//  kWithoutReplacement: m sequential samples, each from the draft
//    distribution with earlier picks removed (m uniforms per node).
enum class DraftStrategy { kGreedy, kWithoutReplacement };

std::string_view strategy_name(DraftStrategy s);
DraftStrategy parse_strategy(std::string_view name);

inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();

struct DraftNode {
  Token token = -1;  // -1 on the root anchor
  std::size_t depth = 0;
  std::size_t parent = kNoParent;
  std::vector<std::size_t> children;  // indices into DraftTree::nodes
  TokenSeq path;                      // tokens from the anchor to this node
  // Present on non-leaf nodes only.
  std::optional<Dist> draft_dist;
  // The distribution the last child was drawn from.
  std::optional<Dist> residual_dist;

  bool is_leaf() const { return children.empty(); }
};

// Nodes are stored in breadth-first order; nodes[0] is the root anchor.
struct DraftTree {
  TokenSeq prefix;
  Topology topology;
  DraftStrategy strategy = DraftStrategy::kGreedy;
  std::vector<DraftNode> nodes;

  const DraftNode& root() const { return nodes.front(); }
  // prefix followed by the node's path.
  TokenSeq context(std::size_t node) const;
  std::size_t size() const { return nodes.size(); }
};

// Grows a tree breadth-first, consuming uniforms in node order.
// InsufficientSupport when a node's draft distribution has fewer than m
// tokens of positive mass.
DraftTree grow_tree(const ConditionalModel& draft, const Topology& topo,
                    std::span<const Token> prefix, UniformStream& rng,
                    DraftStrategy strategy = DraftStrategy::kGreedy);

// Children first (in child order), parent after its subtree, root last.
std::vector<std::size_t> post_order(const DraftTree& tree);

template <class T>
struct ChildSet {
  std::vector<Token> tokens;
  T prob;
};

// Every realizable ordered child list under a node with draft distribution q
// and width m, with its drafting probability.
template <class T>
std::vector<ChildSet<T>> child_sets(const BasicDist<T>& q, std::size_t m,
                                    DraftStrategy strategy) {
  if (q.support_size() < m) {
    throw Error(ErrorCode::kInsufficientSupport,
                "need " + std::to_string(m) + " tokens, support is " +
                    std::to_string(q.support_size()));
  }
  std::vector<ChildSet<T>> out;
  if (strategy == DraftStrategy::kGreedy) {
    std::vector<Token> top = top_k(q, m - 1);
    const BasicDist<T> residual = residual_without<T>(q, top);
    for (Token u : residual.support()) {
      ChildSet<T> set{top, residual[u]};
      set.tokens.push_back(u);
      out.push_back(std::move(set));
    }
    return out;
  }
  std::vector<Token> picked;
  std::function<void(const BasicDist<T>&, T)> expand =
      [&](const BasicDist<T>& cur, T prob) {
        for (Token u : cur.support()) {
          picked.push_back(u);
          const T p = prob * cur[u];
          if (picked.size() == m) {
            out.push_back(ChildSet<T>{picked, p});
          } else {
            const Token drop[1] = {u};
            expand(residual_without<T>(cur, std::span<const Token>(drop)), p);
          }
          picked.pop_back();
        }
      };
  expand(q, T(1));
  return out;
}

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

// Visits every realizable tree with its drafting probability. The tree passed
// to the visitor is only valid during the call. ExplosionCap once more than
// `cap` trees have been produced.
void for_each_tree(
    const ConditionalModel& draft, const Topology& topo,
    std::span<const Token> prefix, DraftStrategy strategy,
    const std::function<void(const DraftTree&, double)>& visit,
    std::uint64_t cap = kDefaultEnumerationCap);

std::vector<std::pair<DraftTree, double>> enumerate_trees(
    const ConditionalModel& draft, const Topology& topo,
    std::span<const Token> prefix,
    DraftStrategy strategy = DraftStrategy::kGreedy,
    std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace specverify
