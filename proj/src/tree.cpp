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

#include "specverify/tree.hpp"

#include <charconv>
#include <deque>

namespace specverify {

std::size_t Topology::node_count() const {
  std::size_t level = 1;
  std::size_t total = 1;
  for (std::size_t w : widths) {
    level *= w;
    total += level;
  }
  return total;
}

std::string Topology::tag() const {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(widths[i]);
  }
  return out;
}

void Topology::validate() const {
  if (widths.empty()) {
    throw Error(ErrorCode::kBadConfig, "topology: needs at least one level");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw Error(ErrorCode::kBadConfig, "topology: width 0");
  }
}

Topology parse_topology(const std::string& tag) {
  Topology topo;
  std::size_t pos = 0;
  while (pos <= tag.size()) {
    std::size_t end = tag.find_first_of("x,", pos);
    if (end == std::string::npos) end = tag.size();
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(tag.data() + pos, tag.data() + end, value);
    if (ec != std::errc() || ptr != tag.data() + end) {
      throw Error(ErrorCode::kBadConfig, "topology: cannot parse '" + tag + "'");
    }
    topo.widths.push_back(value);
    pos = end + 1;
  }
  topo.validate();
  return topo;
}

std::string_view strategy_name(DraftStrategy s) {
  return s == DraftStrategy::kGreedy ? "greedy" : "without-replacement";
}

DraftStrategy parse_strategy(std::string_view name) {
  if (name == "greedy") return DraftStrategy::kGreedy;
  if (name == "without-replacement") return DraftStrategy::kWithoutReplacement;
  throw Error(ErrorCode::kBadConfig,
              "rrsw_drafting: unknown strategy '" + std::string(name) +
                  "' (expected greedy or without-replacement)");
}

TokenSeq DraftTree::context(std::size_t node) const {
  TokenSeq out = prefix;
  const auto& path = nodes[node].path;
  out.insert(out.end(), path.begin(), path.end());
  return out;
}

namespace {

DraftNode make_child(const DraftNode& parent, std::size_t parent_index,
                     Token token) {
  DraftNode child;
  child.token = token;
  child.depth = parent.depth + 1;
  child.parent = parent_index;
  child.path = parent.path;
  child.path.push_back(token);
  return child;
}

}  // namespace

DraftTree grow_tree(const ConditionalModel& draft, const Topology& topo,
                    std::span<const Token> prefix, UniformStream& rng,
                    DraftStrategy strategy) {
  topo.validate();
  DraftTree tree;
  tree.prefix.assign(prefix.begin(), prefix.end());
  tree.topology = topo;
  tree.strategy = strategy;
  tree.nodes.reserve(topo.node_count());
  tree.nodes.emplace_back();

  TokenSeq context = tree.prefix;
  // Breadth-first: node indices grow in the order nodes are expanded.
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const std::size_t depth = tree.nodes[i].depth;
    if (depth == topo.depth()) continue;
    const std::size_t m = topo.widths[depth];

    context.resize(tree.prefix.size());
    context.insert(context.end(), tree.nodes[i].path.begin(),
                   tree.nodes[i].path.end());
    Dist q = draft.eval(context);
    if (q.support_size() < m) {
      throw Error(ErrorCode::kInsufficientSupport,
                  "node at depth " + std::to_string(depth) + " needs " +
                      std::to_string(m) + " tokens, support is " +
                      std::to_string(q.support_size()));
    }

    std::vector<Token> picks;
    picks.reserve(m);
    Dist last_source = q;
    if (strategy == DraftStrategy::kGreedy) {
      picks = top_k(q, m - 1);
      last_source = residual_without(q, std::span<const Token>(picks));
      picks.push_back(sample(last_source, rng()));
    } else {
      for (std::size_t j = 0; j < m; ++j) {
        if (j > 0) {
          const Token drop[1] = {picks.back()};
          last_source = residual_without(last_source,
                                         std::span<const Token>(drop));
        }
        picks.push_back(sample(last_source, rng()));
      }
    }

    for (Token u : picks) {
      tree.nodes[i].children.push_back(tree.nodes.size());
      tree.nodes.push_back(make_child(tree.nodes[i], i, u));
    }
    tree.nodes[i].draft_dist = std::move(q);
    tree.nodes[i].residual_dist = std::move(last_source);
  }
  return tree;
}

std::vector<std::size_t> post_order(const DraftTree& tree) {
  std::vector<std::size_t> order;
  order.reserve(tree.nodes.size());
  // Iterative: (node, next child position).
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& children = tree.nodes[node].children;
    if (next < children.size()) {
      const std::size_t child = children[next++];
      stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void for_each_tree(const ConditionalModel& draft, const Topology& topo,
                   std::span<const Token> prefix, DraftStrategy strategy,
                   const std::function<void(const DraftTree&, double)>& visit,
                   std::uint64_t cap) {
  topo.validate();
  DraftTree tree;
  tree.prefix.assign(prefix.begin(), prefix.end());
  tree.topology = topo;
  tree.strategy = strategy;
  tree.nodes.reserve(topo.node_count());
  tree.nodes.emplace_back();
  std::uint64_t produced = 0;

  // Expands nodes in index order; since children are appended, index order is
  // breadth-first order, matching grow_tree.
  std::function<void(std::size_t, double)> expand = [&](std::size_t i,
                                                        double prob) {
    while (i < tree.nodes.size() && tree.nodes[i].depth == topo.depth()) ++i;
    if (i == tree.nodes.size()) {
      if (++produced > cap) {
        throw Error(ErrorCode::kExplosionCap,
                    "more than " + std::to_string(cap) + " draft trees");
      }
      visit(tree, prob);
      return;
    }
    const std::size_t m = topo.widths[tree.nodes[i].depth];
    Dist q = draft.eval(tree.context(i));
    const auto sets = child_sets(q, m, strategy);
    const std::size_t base = tree.nodes.size();
    for (const auto& set : sets) {
      // Both strategies draw the last child from q minus the first m - 1.
      Dist source =
          residual_without(q, std::span<const Token>(set.tokens.data(), m - 1));
      tree.nodes[i].draft_dist = q;
      tree.nodes[i].residual_dist = std::move(source);
      for (Token u : set.tokens) {
        tree.nodes[i].children.push_back(tree.nodes.size());
        tree.nodes.push_back(make_child(tree.nodes[i], i, u));
      }
      expand(i + 1, prob * set.prob);
      tree.nodes.resize(base);
      tree.nodes[i].children.clear();
    }
    tree.nodes[i].draft_dist.reset();
    tree.nodes[i].residual_dist.reset();
  };
  expand(0, 1.0);
}

std::vector<std::pair<DraftTree, double>> enumerate_trees(
    const ConditionalModel& draft, const Topology& topo,
    std::span<const Token> prefix, DraftStrategy strategy, std::uint64_t cap) {
  std::vector<std::pair<DraftTree, double>> out;
  for_each_tree(
      draft, topo, prefix, strategy,
      [&out](const DraftTree& t, double p) { out.emplace_back(t, p); }, cap);
  return out;
}

}  // namespace specverify
