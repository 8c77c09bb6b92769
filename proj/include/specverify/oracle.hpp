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

// Exact oracle: output distributions of one verification cycle, computed by
// enumerating draft trees and integrating the acceptance thresholds, plus
// the single-node identity checks and a seeded Monte Carlo driver.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specverify/baselines.hpp"
#include "specverify/models.hpp"
#include "specverify/prob.hpp"
#include "specverify/tree.hpp"
#include "specverify/univer.hpp"

namespace specverify {

// Output sequence (accepted draft tokens then the bonus token) -> probability.
template <class T>
using OutputDist = std::map<TokenSeq, T>;

struct CheckReport {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string witness;  // set whenever passed == false

  std::string to_json_line() const;
};

struct VerifierSpec {
  Method method = Method::kUniver;
  Mutation mutation = Mutation::kNone;  // applied to UniVer plans only
  DraftStrategy drafting = DraftStrategy::kGreedy;
};

std::string describe(const VerifierSpec& spec);

// The node plan a verifier uses. Root-down verifiers always plan at p~ = 1.
template <class T>
NodePlan<T> node_plan(const VerifierSpec& spec, const T& p_tilde,
                      const BasicDist<T>& target, const BasicDist<T>& draft,
                      std::span<const Token> children, bool is_root) {
  switch (spec.method) {
    case Method::kUniver:
      return ot_plan<T>(p_tilde, target, draft, children, spec.mutation,
                        is_root);
    case Method::kGreedy:
      return ot_plan<T>(T(1), target, draft, children);
    case Method::kRrsw:
      return rrsw_plan<T>(T(1), target, draft, children, spec.drafting);
    case Method::kTraversal:
      return rrsw_plan<T>(p_tilde, target, draft, children, spec.drafting);
  }
  throw Error(ErrorCode::kBadConfig, "unknown method");
}

// Mass below which an unreachable fallback without a bonus distribution is
// treated as rounding noise.
template <class T>
T unreachable_slack() {
  if constexpr (kIsExact<T>) {
    return T(0);
  } else {
    return T(1e-9);
  }
}

// Subtree-factorized exact cycle distribution. Given a node's child set the
// children's subtrees are drafted independently, so each subtree only needs
// its expected stop distribution and its expected pass-through probability.
template <class T>
class CycleEnumerator {
 public:
  CycleEnumerator(VerifierSpec spec, const ConditionalModel& target,
                  const ConditionalModel& draft, const Topology& topo,
                  std::span<const Token> prefix,
                  std::uint64_t cap = kDefaultEnumerationCap)
      : spec_(spec),
        target_(target),
        draft_(draft),
        topo_(topo),
        prefix_(prefix.begin(), prefix.end()),
        cap_(cap) {
    topo_.validate();
    require_compatible(spec_.method, spec_.drafting);
  }

  OutputDist<T> run(const T& root_p_tilde = T(1)) {
    plans_ = 0;
    TokenSeq path;
    if (is_two_stage(spec_.method)) {
      return two_stage(path, root_p_tilde, true).stops;
    }
    if (root_p_tilde != T(1)) {
      throw Error(ErrorCode::kBadConfig,
                  "root acceptance below 1 needs a two-stage verifier");
    }
    return root_down(path);
  }

  std::uint64_t plans_evaluated() const { return plans_; }

 private:
  struct Subtree {
    T pass = T(1);
    OutputDist<T> stops;
  };

  const BasicDist<T>& target_at(const TokenSeq& path) {
    return cached(target_cache_, target_, path);
  }
  const BasicDist<T>& draft_at(const TokenSeq& path) {
    return cached(draft_cache_, draft_, path);
  }

  const BasicDist<T>& cached(std::map<TokenSeq, BasicDist<T>>& cache,
                             const ConditionalModel& model,
                             const TokenSeq& path) {
    auto it = cache.find(path);
    if (it == cache.end()) {
      TokenSeq ctx = prefix_;
      ctx.insert(ctx.end(), path.begin(), path.end());
      it = cache.emplace(path, model.eval_as<T>(ctx)).first;
    }
    return it->second;
  }

  void count_plan() {
    if (++plans_ > cap_) {
      throw Error(ErrorCode::kExplosionCap,
                  "more than " + std::to_string(cap_) + " node plans");
    }
  }

  static void add_bonus(OutputDist<T>& out, TokenSeq& path,
                        const BasicDist<T>& bonus, const T& weight) {
    if (!(weight > T(0))) return;
    for (Token y : bonus.support()) {
      path.push_back(y);
      out[path] += weight * bonus[y];
      path.pop_back();
    }
  }

  static void add_scaled(OutputDist<T>& out, const OutputDist<T>& in,
                         const T& weight) {
    if (!(weight > T(0))) return;
    for (const auto& [seq, p] : in) out[seq] += weight * p;
  }

  // A corrupted plan may strand mass here; it then shows up as a closure
  // deviation instead of an error.
  void fallback_without_bonus(const T& weight) {
    if (spec_.mutation == Mutation::kNone && weight > unreachable_slack<T>()) {
      throw Error(ErrorCode::kInternalNumerical,
                  "reachable fallback with no residual bonus mass");
    }
  }

  Subtree two_stage(TokenSeq& path, const T& p_tilde, bool is_root) {
    Subtree out;
    const std::size_t depth = path.size();
    if (depth == topo_.depth()) {
      out.pass = T(1) - p_tilde;
      add_bonus(out.stops, path, target_at(path), p_tilde);
      return out;
    }
    const BasicDist<T> q = draft_at(path);
    const BasicDist<T> p = target_at(path);
    const auto sets =
        child_sets<T>(q, topo_.widths[depth], spec_.drafting);
    out.pass = T(0);
    for (const auto& set : sets) {
      count_plan();
      const auto plan = node_plan<T>(spec_, p_tilde, p, q, set.tokens, is_root);
      T run = set.prob;
      for (std::size_t j = 0; j < set.tokens.size(); ++j) {
        path.push_back(set.tokens[j]);
        Subtree child = two_stage(path, plan.child_probs[j], false);
        path.pop_back();
        add_scaled(out.stops, child.stops, run);
        run *= child.pass;
      }
      const T take = run * plan.fallback;
      if (plan.bonus) {
        add_bonus(out.stops, path, *plan.bonus, take);
      } else {
        fallback_without_bonus(take);
      }
      out.pass += run * (T(1) - plan.fallback);
    }
    return out;
  }

  OutputDist<T> root_down(TokenSeq& path) {
    OutputDist<T> out;
    const std::size_t depth = path.size();
    if (depth == topo_.depth()) {
      add_bonus(out, path, target_at(path), T(1));
      return out;
    }
    const BasicDist<T> q = draft_at(path);
    const BasicDist<T> p = target_at(path);
    const auto sets =
        child_sets<T>(q, topo_.widths[depth], spec_.drafting);
    for (const auto& set : sets) {
      count_plan();
      const auto plan = node_plan<T>(spec_, T(1), p, q, set.tokens, false);
      T reach = set.prob;
      for (std::size_t j = 0; j < set.tokens.size(); ++j) {
        const T c = plan.child_probs[j];
        if (c > T(0)) {
          path.push_back(set.tokens[j]);
          add_scaled(out, root_down(path), reach * c);
          path.pop_back();
        }
        reach *= T(1) - c;
      }
      if (plan.bonus) {
        add_bonus(out, path, *plan.bonus, reach);
      } else {
        fallback_without_bonus(reach);
      }
    }
    return out;
  }

  VerifierSpec spec_;
  ConditionalModel target_;
  ConditionalModel draft_;
  Topology topo_;
  TokenSeq prefix_;
  std::uint64_t cap_;
  std::uint64_t plans_ = 0;
  std::map<TokenSeq, BasicDist<T>> target_cache_;
  std::map<TokenSeq, BasicDist<T>> draft_cache_;
};

template <class T>
OutputDist<T> exact_output_dist(const VerifierSpec& spec,
                                const ConditionalModel& target,
                                const ConditionalModel& draft,
                                const Topology& topo,
                                std::span<const Token> prefix,
                                const T& root_p_tilde = T(1),
                                std::uint64_t cap = kDefaultEnumerationCap) {
  CycleEnumerator<T> e(spec, target, draft, topo, prefix, cap);
  return e.run(root_p_tilde);
}

// Second route, double only: enumerate every draft tree, allocate it, and
// integrate its thresholds.
OutputDist<double> exact_output_dist_by_trees(
    const VerifierSpec& spec, const ConditionalModel& target,
    const ConditionalModel& draft, const Topology& topo,
    std::span<const Token> prefix, double root_p_tilde = 1.0,
    std::uint64_t cap = kDefaultEnumerationCap);

// Output distribution of the post-order scan over one allocated tree.
OutputDist<double> tree_output_dist(const AllocatedTree& at);

// Output distribution of a root-down walk over one drafted tree.
OutputDist<double> root_down_tree_dist(const VerifierSpec& spec,
                                       const DraftTree& tree,
                                       const ConditionalModel& target);

template <class T>
T total_mass(const OutputDist<T>& d) {
  T s = T(0);
  for (const auto& kv : d) s += kv.second;
  return s;
}

// E[accepted draft tokens]; a cycle that accepts nothing counts 0.
template <class T>
T acceptance_length(const OutputDist<T>& d) {
  T s = T(0);
  for (const auto& [seq, p] : d) s += p * T(static_cast<long>(seq.size() - 1));
  return s;
}

template <class T>
struct HorizonComparison {
  T total_variation = T(0);
  T max_abs = T(0);
  TokenSeq worst;  // sequence with the largest |difference|
};

// Extends every cycle output to `horizon` tokens by continuing under the
// target, then compares with the target's own horizon-length distribution.
template <class T>
HorizonComparison<T> compare_with_target(const OutputDist<T>& cycle,
                                         const ConditionalModel& target,
                                         std::span<const Token> prefix,
                                         std::size_t horizon) {
  HorizonComparison<T> out;
  TokenSeq ctx(prefix.begin(), prefix.end());
  TokenSeq seq;
  // q: cycle mass already emitted along seq, carried forward by the target.
  std::function<void(const T&, const T&)> walk = [&](const T& q, const T& mb) {
    if (seq.size() == horizon) {
      const T diff = q > mb ? q - mb : mb - q;
      out.total_variation += diff;
      if (diff > out.max_abs) {
        out.max_abs = diff;
        out.worst = seq;
      }
      return;
    }
    const BasicDist<T> next = target.eval_as<T>(ctx);
    for (std::size_t x = 0; x < next.size(); ++x) {
      const auto tok = static_cast<Token>(x);
      seq.push_back(tok);
      T q_next = q * next[tok];
      if (auto it = cycle.find(seq); it != cycle.end()) q_next += it->second;
      const T mb_next = mb * next[tok];
      if (q_next > T(0) || mb_next > T(0)) {
        ctx.push_back(tok);
        walk(q_next, mb_next);
        ctx.pop_back();
      }
      seq.pop_back();
    }
  };
  walk(T(0), T(1));
  out.total_variation /= T(2);
  return out;
}

std::string format_seq(std::span<const Token> seq);

// Single-node identity: E_{u_m}[p_v(t)] == p~ Mb(t) for every t, and
// E_{u_m}[p_v(not v)] == 1 - p~.
template <class T>
CheckReport check_local_lossless(const T& p_tilde, const BasicDist<T>& target,
                                 const BasicDist<T>& draft, std::size_t m,
                                 Mutation mutation = Mutation::kNone,
                                 double tolerance = 1e-9) {
  require_same_vocab(target, draft);
  const auto top = top_k(draft, m - 1);
  const auto residual = residual_without<T>(draft, top);
  std::vector<T> expect(target.size(), T(0));
  T expect_reject = T(0);
  for (Token um : residual.support()) {
    const auto alloc =
        allocate_children<T>(p_tilde, target, draft, top, um, mutation);
    for (std::size_t t = 0; t < target.size(); ++t) {
      expect[t] += residual[um] * alloc.marginals[t];
    }
    expect_reject += residual[um] * alloc.reject_mass;
  }
  CheckReport r;
  r.name = "local-lossless";
  r.tolerance = tolerance;
  Token worst = -1;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const T dev = expect[t] - p_tilde * target[static_cast<Token>(t)];
    const double d = std::abs(to_double(dev));
    if (worst < 0 || d > r.max_deviation) {
      r.max_deviation = d;
      worst = static_cast<Token>(t);
    }
    if (kIsExact<T> && dev != T(0)) r.passed = false;
  }
  const double reject_dev =
      std::abs(to_double(expect_reject - (T(1) - p_tilde)));
  if (kIsExact<T> && expect_reject != T(1) - p_tilde) r.passed = false;
  r.max_deviation = std::max(r.max_deviation, reject_dev);
  if (!kIsExact<T>) r.passed = r.max_deviation <= tolerance;
  if (!r.passed) {
    std::ostringstream w;
    w << "p_tilde=" << to_double(p_tilde) << " m=" << m
      << " vocab=" << target.size() << " worst_token=" << worst
      << " reject_dev=" << reject_dev;
    r.witness = w.str();
  }
  return r;
}

template <class T>
struct OptimalityValues {
  T achieved = T(0);     // E_{u_m}[sum_j p_v(u_j)]
  T closed_form = T(0);  // p~ Mb(top) + sum min(p~ Mb, Ms')
  T diagonal = T(0);     // sum_u gamma(u, u) of UniVer's coupling
  T ot_bound = T(0);     // sum_u min(Ms'(u), p~ Mb(u))
  T coupling_violation = T(0);  // worst marginal constraint residual
  T greedy_rate = T(0);  // sum_top Mb + sum min(Mb, Ms'); p~-free
};

// UniVer's coupling gamma(u, t) = Ms'(u) p_v(t | u_m = u) over t in vocab
// plus "not v", checked against the scaled transport constraints.
template <class T>
OptimalityValues<T> conditional_optimality_values(const T& p_tilde,
                                                  const BasicDist<T>& target,
                                                  const BasicDist<T>& draft,
                                                  std::size_t m) {
  require_same_vocab(target, draft);
  const std::size_t vocab = target.size();
  const auto top = top_k(draft, m - 1);
  const auto residual = residual_without<T>(draft, top);
  OptimalityValues<T> v;
  std::vector<T> column(vocab, T(0));
  T reject_column = T(0);
  auto worse = [&v](const T& dev) {
    const T a = dev < T(0) ? -dev : dev;
    if (a > v.coupling_violation) v.coupling_violation = a;
  };
  for (Token um : residual.support()) {
    const auto alloc = allocate_children<T>(p_tilde, target, draft, top, um);
    const T w = residual[um];
    T row = alloc.reject_mass;
    for (std::size_t t = 0; t < vocab; ++t) {
      column[t] += w * alloc.marginals[t];
      row += alloc.marginals[t];
    }
    reject_column += w * alloc.reject_mass;
    // Row sums of gamma equal Ms'(u) iff the conditional plan has mass 1.
    worse(row - T(1));
    T rate = alloc.marginals[static_cast<std::size_t>(um)];
    for (Token t : top) rate += alloc.marginals[static_cast<std::size_t>(t)];
    v.achieved += w * rate;
    v.diagonal += w * alloc.marginals[static_cast<std::size_t>(um)];
  }
  for (std::size_t t = 0; t < vocab; ++t) {
    worse(column[t] - p_tilde * target[static_cast<Token>(t)]);
  }
  worse(reject_column - (T(1) - p_tilde));

  T top_mass = T(0);
  for (Token t : top) top_mass += target[t];
  std::vector<T> scaled(vocab);
  for (std::size_t t = 0; t < vocab; ++t) {
    scaled[t] = p_tilde * target[static_cast<Token>(t)];
  }
  for (std::size_t u = 0; u < vocab; ++u) {
    const T a = scaled[u];
    const T b = residual[static_cast<Token>(u)];
    v.ot_bound += a < b ? a : b;
  }
  v.closed_form = p_tilde * top_mass + v.ot_bound;
  v.greedy_rate = top_mass + overlap(target, residual);
  return v;
}

template <class T>
CheckReport check_conditional_optimality(const T& p_tilde,
                                         const BasicDist<T>& target,
                                         const BasicDist<T>& draft,
                                         std::size_t m,
                                         double tolerance = 1e-9) {
  const auto v = conditional_optimality_values(p_tilde, target, draft, m);
  T top_mass = T(0);
  for (Token t : top_k(draft, m - 1)) top_mass += target[t];
  std::vector<T> devs = {v.achieved - v.closed_form,
                         v.diagonal - v.ot_bound,
                         v.achieved - (p_tilde * top_mass + v.ot_bound),
                         v.coupling_violation};
  if (p_tilde == T(1)) devs.push_back(v.achieved - v.greedy_rate);
  CheckReport r;
  r.name = "conditional-optimality";
  r.tolerance = tolerance;
  for (const T& d : devs) {
    r.max_deviation = std::max(r.max_deviation, std::abs(to_double(d)));
    if (kIsExact<T> && d != T(0)) r.passed = false;
  }
  if (!kIsExact<T>) r.passed = r.max_deviation <= tolerance;
  if (!r.passed) {
    std::ostringstream w;
    w << "p_tilde=" << to_double(p_tilde) << " m=" << m
      << " achieved=" << to_double(v.achieved)
      << " closed_form=" << to_double(v.closed_form)
      << " ot_bound=" << to_double(v.ot_bound);
    r.witness = w.str();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Configuration-level checks.

struct OracleCase {
  std::string name;
  ModelPairConfig model;
  Topology topo;
  TokenSeq prefix;
};

std::string describe(const OracleCase& c);

// Exact TV between a verifier's cycle output (extended to depth + 1 tokens)
// and the target, plus probability closure.
CheckReport check_lossless(const OracleCase& c, const VerifierSpec& spec,
                           bool rational = false, double tolerance = 1e-9);

template <class T>
T exact_acceptance_length(const VerifierSpec& spec,
                          const ConditionalModel& target,
                          const ConditionalModel& draft, const Topology& topo,
                          std::span<const Token> prefix,
                          const T& root_p_tilde = T(1)) {
  return acceptance_length(
      exact_output_dist<T>(spec, target, draft, topo, prefix, root_p_tilde));
}

// E[N_UniVer with root p~] >= root p~ * E[N_Greedy].
CheckReport check_superiority(const OracleCase& c, double root_p_tilde,
                              double slack = 1e-12);

// At least twenty configurations over vocab 3..6, widths [1], [2], [2,2],
// [3], [2,2,2] and epsilon 0, 0.3, 0.7, 1. The rational suite uses exact
// integer-weight models and keeps trees small.
std::vector<OracleCase> stock_lossless_suite();
std::vector<OracleCase> rational_lossless_suite();

struct SuiteOptions {
  std::vector<Method> methods = {Method::kUniver, Method::kRrsw,
                                 Method::kGreedy};
  Mutation mutation = Mutation::kNone;
  bool rational = false;
  std::size_t workers = 1;
};

// One report per (case, method), in case-major order.
std::vector<CheckReport> run_lossless_suite(const std::vector<OracleCase>& cases,
                                            const SuiteOptions& options);

// Random distribution over `vocab` tokens; each token is zeroed with
// probability `zero_prob` (at least `min_support` tokens stay positive).
Dist random_distribution(std::size_t vocab, UniformStream& rng,
                         double zero_prob = 0.0, std::size_t min_support = 1);

// Randomized single-node sweeps; the local-lossless one includes a Z = 0
// construction.
CheckReport local_lossless_sweep(std::size_t draws, std::uint64_t seed);
CheckReport conditional_optimality_sweep(std::size_t draws,
                                         std::uint64_t seed);
// Block >= Local pointwise on random ratio vectors; zero tolerance.
CheckReport block_local_sweep(std::size_t vectors, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte Carlo.

struct McResult {
  std::size_t trials = 0;
  // histogram[k] = trials that accepted exactly k draft tokens.
  std::vector<std::uint64_t> histogram;

  double mean() const;
  double stderr_of_mean() const;
  // Fraction of trials accepting at least d draft tokens (d >= 1).
  double depth_rate(std::size_t d) const;
};

struct McOptions {
  std::size_t trials = 10000;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  // Random context tokens drawn per trial ahead of the tree.
  std::size_t context_length = 0;
  TokenSeq prefix;
  // Drafting for rrsw / traversal; univer and greedy always draft greedily.
  DraftStrategy rrsw_drafting = DraftStrategy::kGreedy;
};

// Trial i uses the stream derive_seed(master_seed, i) only, and counts are
// merged as integers, so the result does not depend on the worker count.
McResult monte_carlo_acceptance(Method method, const ModelPair& models,
                                const Topology& topo, const McOptions& opts);

}  // namespace specverify
