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

#include "specverify/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace specverify {

std::string CheckReport::to_json_line() const {
  nlohmann::ordered_json j;
  j["check"] = name;
  j["passed"] = passed;
  j["max_deviation"] = max_deviation;
  j["tolerance"] = tolerance;
  if (!witness.empty()) j["witness"] = witness;
  return j.dump();
}

std::string describe(const VerifierSpec& spec) {
  std::string out(method_name(spec.method));
  if (spec.drafting != DraftStrategy::kGreedy) {
    out += "@";
    out += strategy_name(spec.drafting);
  }
  if (spec.mutation != Mutation::kNone) {
    out += "+";
    out += mutation_name(spec.mutation);
  }
  return out;
}

std::string format_seq(std::span<const Token> seq) {
  std::string out = "[";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(seq[i]);
  }
  return out + "]";
}

std::string describe(const OracleCase& c) {
  std::ostringstream s;
  s << c.name << " family=" << family_name(c.model.family)
    << " vocab=" << c.model.vocab_size << " seed=" << c.model.seed
    << " eps=" << c.model.epsilon << " widths=" << c.topo.tag()
    << " prefix=" << format_seq(c.prefix);
  return s.str();
}

// ---------------------------------------------------------------------------

namespace {

void add_bonus(OutputDist<double>& out, TokenSeq path, const Dist& bonus,
               double weight) {
  if (!(weight > 0.0)) return;
  path.push_back(-1);
  for (Token y : bonus.support()) {
    path.back() = y;
    out[path] += weight * bonus[y];
  }
}

std::vector<Token> child_tokens(const DraftTree& tree, std::size_t node) {
  std::vector<Token> out;
  for (std::size_t c : tree.nodes[node].children) {
    out.push_back(tree.nodes[c].token);
  }
  return out;
}

void root_down_walk(const VerifierSpec& spec, const DraftTree& tree,
                    const ConditionalModel& target, std::size_t node,
                    double weight, OutputDist<double>& out) {
  const DraftNode& v = tree.nodes[node];
  const Dist p = target.eval(tree.context(node));
  if (v.is_leaf()) {
    add_bonus(out, v.path, p, weight);
    return;
  }
  const auto children = child_tokens(tree, node);
  const auto plan = node_plan<double>(spec, 1.0, p, *v.draft_dist, children,
                                      false);
  double reach = weight;
  for (std::size_t j = 0; j < children.size(); ++j) {
    const double c = plan.child_probs[j];
    if (c > 0.0) {
      root_down_walk(spec, tree, target, v.children[j], reach * c, out);
    }
    reach *= 1.0 - c;
  }
  if (plan.bonus) {
    add_bonus(out, v.path, *plan.bonus, reach);
  } else if (reach > unreachable_slack<double>()) {
    throw Error(ErrorCode::kInternalNumerical,
                "reachable fallback with no residual bonus mass");
  }
}

}  // namespace

OutputDist<double> tree_output_dist(const AllocatedTree& at) {
  const DraftTree& tree = *at.tree;
  OutputDist<double> out;
  double run = 1.0;
  for (std::size_t v : post_order(tree)) {
    const double thr = decision_threshold(at, v);
    const double take = run * thr;
    if (tree.nodes[v].is_leaf()) {
      add_bonus(out, tree.nodes[v].path, at.target.eval(tree.context(v)),
                take);
    } else if (at.nodes[v].residual_bonus_dist) {
      add_bonus(out, tree.nodes[v].path, *at.nodes[v].residual_bonus_dist,
                take);
    } else if (take > unreachable_slack<double>()) {
      throw Error(ErrorCode::kInternalNumerical,
                  "reachable fallback with no residual bonus mass");
    }
    run *= 1.0 - thr;
  }
  return out;
}

OutputDist<double> root_down_tree_dist(const VerifierSpec& spec,
                                       const DraftTree& tree,
                                       const ConditionalModel& target) {
  OutputDist<double> out;
  root_down_walk(spec, tree, target, 0, 1.0, out);
  return out;
}

OutputDist<double> exact_output_dist_by_trees(
    const VerifierSpec& spec, const ConditionalModel& target,
    const ConditionalModel& draft, const Topology& topo,
    std::span<const Token> prefix, double root_p_tilde, std::uint64_t cap) {
  require_compatible(spec.method, spec.drafting);
  const bool two_stage = is_two_stage(spec.method);
  if (!two_stage && root_p_tilde != 1.0) {
    throw Error(ErrorCode::kBadConfig,
                "root acceptance below 1 needs a two-stage verifier");
  }
  PlanFn plan = [spec](double p_tilde, const Dist& p, const Dist& q,
                       std::span<const Token> children, std::size_t node) {
    return node_plan<double>(spec, p_tilde, p, q, children, node == 0);
  };
  OutputDist<double> out;
  for_each_tree(
      draft, topo, prefix, spec.drafting,
      [&](const DraftTree& tree, double prob) {
        const OutputDist<double> d =
            two_stage ? tree_output_dist(allocate_tree_with(
                            tree, target, plan, root_p_tilde))
                      : root_down_tree_dist(spec, tree, target);
        for (const auto& [seq, p] : d) out[seq] += prob * p;
      },
      cap);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
CheckReport lossless_report(const OracleCase& c, const VerifierSpec& spec,
                            double tolerance) {
  const auto [target, draft] = make_pair(c.model);
  const OutputDist<T> cycle =
      exact_output_dist<T>(spec, target, draft, c.topo, c.prefix);
  const T mass = total_mass(cycle);
  const auto cmp =
      compare_with_target<T>(cycle, target, c.prefix, c.topo.depth() + 1);
  CheckReport r;
  r.tolerance = tolerance;
  const double mass_dev = std::abs(to_double(mass - T(1)));
  r.max_deviation = std::max(to_double(cmp.total_variation), mass_dev);
  if constexpr (kIsExact<T>) {
    r.passed = cmp.total_variation == T(0) && mass == T(1);
  } else {
    r.passed = r.max_deviation <= tolerance;
  }
  if (!r.passed) {
    std::ostringstream w;
    w << describe(c) << " tv=" << to_double(cmp.total_variation)
      << " mass=" << to_double(mass) << " worst=" << format_seq(cmp.worst);
    r.witness = w.str();
  }
  return r;
}

}  // namespace

CheckReport check_lossless(const OracleCase& c, const VerifierSpec& spec,
                           bool rational, double tolerance) {
  CheckReport r;
  try {
    r = rational ? lossless_report<Rational>(c, spec, tolerance)
                 : lossless_report<double>(c, spec, tolerance);
  } catch (const Error& e) {
    r.tolerance = tolerance;
    r.passed = false;
    r.max_deviation = 1.0;
    r.witness = describe(c) + " error=" + e.what();
  }
  r.name = std::string("lossless/") + describe(spec) + "/" + c.name +
           (rational ? "/rational" : "");
  return r;
}

CheckReport check_superiority(const OracleCase& c, double root_p_tilde,
                              double slack) {
  const auto [target, draft] = make_pair(c.model);
  const double univer = exact_acceptance_length<double>(
      VerifierSpec{Method::kUniver}, target, draft, c.topo, c.prefix,
      root_p_tilde);
  const double greedy = exact_acceptance_length<double>(
      VerifierSpec{Method::kGreedy}, target, draft, c.topo, c.prefix);
  CheckReport r;
  r.name = "superiority/" + c.name + "/root=" + std::to_string(root_p_tilde);
  r.tolerance = slack;
  r.max_deviation = std::max(0.0, root_p_tilde * greedy - univer);
  r.passed = univer >= root_p_tilde * greedy - slack;
  if (!r.passed) {
    std::ostringstream w;
    w.precision(17);
    w << describe(c) << " univer=" << univer << " greedy=" << greedy;
    r.witness = w.str();
  }
  return r;
}

std::vector<OracleCase> stock_lossless_suite() {
  const std::vector<std::vector<std::size_t>> widths = {
      {1}, {2}, {2, 2}, {3}, {2, 2, 2}};
  const std::vector<double> eps = {0.0, 0.3, 0.7, 1.0};
  std::vector<OracleCase> out;
  std::size_t i = 0;
  for (const auto& w : widths) {
    for (double e : eps) {
      OracleCase c;
      c.model.vocab_size = 3 + (i % 4);
      c.model.family =
          i % 3 == 1 ? ModelFamily::kMarkov1 : ModelFamily::kSeededRandom;
      c.model.seed = 1000 + i;
      c.model.epsilon = e;
      c.topo.widths = w;
      if (i % 2 == 1) c.prefix = {static_cast<Token>(i % 3)};
      c.name = "case" + std::to_string(i);
      out.push_back(std::move(c));
      ++i;
    }
  }
  // A few extra draws: flatter models, temperature, longer prefixes.
  for (std::size_t k = 0; k < 4; ++k, ++i) {
    OracleCase c;
    c.model.vocab_size = 4 + (k % 3);
    c.model.family = k % 2 ? ModelFamily::kMarkov1 : ModelFamily::kSeededRandom;
    c.model.seed = 1000 + i;
    c.model.epsilon = eps[(k + 1) % 4];
    c.model.concentration = 0.5 + k;
    c.model.temperature = k == 2 ? 0.6 : 1.0;
    c.topo.widths = k % 2 ? std::vector<std::size_t>{3, 1}
                          : std::vector<std::size_t>{2, 2};
    c.prefix = {0, static_cast<Token>(k % 3)};
    c.name = "case" + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<OracleCase> rational_lossless_suite() {
  const std::vector<std::vector<std::size_t>> widths = {{1}, {2}, {2, 2}, {3}};
  const std::vector<double> eps = {0.0, 0.3, 0.7, 1.0};
  std::vector<OracleCase> out;
  std::size_t i = 0;
  for (const auto& w : widths) {
    for (std::size_t k = 0; k < 2; ++k, ++i) {
      OracleCase c;
      c.model.vocab_size = 3 + (i % 2);
      c.model.family =
          i % 2 ? ModelFamily::kMarkov1 : ModelFamily::kSeededRandom;
      c.model.seed = 5000 + i;
      c.model.epsilon = eps[i % 4];
      c.model.exact_weights = true;
      c.topo.widths = w;
      c.name = "exact" + std::to_string(i);
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<CheckReport> run_lossless_suite(const std::vector<OracleCase>& cases,
                                            const SuiteOptions& options) {
  struct Job {
    const OracleCase* c;
    VerifierSpec spec;
  };
  std::vector<Job> jobs;
  for (const auto& c : cases) {
    for (Method m : options.methods) {
      jobs.push_back(Job{&c, VerifierSpec{m, options.mutation}});
    }
  }
  std::vector<CheckReport> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        out[j] = check_lossless(*jobs[j].c, jobs[j].spec, options.rational);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, options.workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------

Dist random_distribution(std::size_t vocab, UniformStream& rng,
                         double zero_prob, std::size_t min_support) {
  min_support = std::clamp<std::size_t>(min_support, 1, vocab);
  std::vector<double> w(vocab);
  std::size_t positive = 0;
  for (double& x : w) {
    const bool zero = rng() < zero_prob;
    // Exponential weights give a flat Dirichlet.
    x = zero ? 0.0 : -std::log(1.0 - rng());
    if (x > 0.0) ++positive;
  }
  for (std::size_t i = 0; positive < min_support; ++i) {
    if (!(w[i] > 0.0)) {
      w[i] = -std::log(1.0 - rng()) + 1e-3;
      ++positive;
    }
  }
  return normalize(std::move(w));
}

namespace {

struct NodeDraw {
  double p_tilde;
  Dist target;
  Dist draft;
  std::size_t m;
};

NodeDraw random_node(std::uint64_t seed, std::size_t index, bool open_zero) {
  UniformStream rng(derive_seed(seed, index));
  const std::size_t vocab = 2 + static_cast<std::size_t>(rng() * 7);
  const std::size_t m = 1 + static_cast<std::size_t>(rng() * std::min<double>(
                                                              vocab, 4));
  const double zero_prob = (index % 3 == 0) ? 0.3 : 0.0;
  Dist target = random_distribution(vocab, rng, zero_prob, 1);
  Dist draft = random_distribution(vocab, rng, zero_prob, m);
  double p_tilde;
  switch (index % 8) {
    case 0:
      p_tilde = open_zero ? 1e-3 : 0.0;
      break;
    case 1:
      p_tilde = 1.0;
      break;
    default:
      p_tilde = open_zero ? 1.0 - rng() : rng();
  }
  return NodeDraw{p_tilde, std::move(target), std::move(draft), m};
}

void fold(CheckReport& acc, const CheckReport& r) {
  if (!r.passed && acc.passed) acc.witness = r.witness;
  acc.max_deviation = std::max(acc.max_deviation, r.max_deviation);
  acc.passed = acc.passed && r.passed;
}

}  // namespace

CheckReport local_lossless_sweep(std::size_t draws, std::uint64_t seed) {
  CheckReport acc;
  acc.name = "local-lossless-sweep";
  acc.tolerance = 1e-9;
  // Z = 0: every bracket vanishes and the residual sample is always
  // accepted.
  {
    const Dist target = Dist::from_probs({0.0, 0.5, 0.5});
    const Dist draft = Dist::from_probs({0.6, 0.2, 0.2});
    fold(acc, check_local_lossless<double>(1.0, target, draft, 2));
  }
  for (std::size_t i = 0; i < draws; ++i) {
    const auto d = random_node(seed, i, false);
    fold(acc, check_local_lossless<double>(d.p_tilde, d.target, d.draft, d.m));
  }
  return acc;
}

CheckReport conditional_optimality_sweep(std::size_t draws,
                                         std::uint64_t seed) {
  CheckReport acc;
  acc.name = "conditional-optimality-sweep";
  acc.tolerance = 1e-9;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto d = random_node(seed, i, true);
    fold(acc,
         check_conditional_optimality<double>(d.p_tilde, d.target, d.draft,
                                              d.m));
  }
  return acc;
}

CheckReport block_local_sweep(std::size_t vectors, std::uint64_t seed) {
  CheckReport r;
  r.name = "block-vs-local-sweep";
  r.tolerance = 0.0;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < vectors; ++i) {
    UniformStream rng(derive_seed(seed, i));
    const std::size_t len = 1 + static_cast<std::size_t>(rng() * 8);
    std::vector<double> ratios(len);
    for (double& x : ratios) {
      const double u = rng();
      x = u < 0.1 ? 0.0 : (u < 0.2 ? 1.0 : 3.0 * rng());
    }
    const auto local = local_chain_probs(ratios);
    const auto block = block_chain_probs(ratios);
    for (std::size_t k = 0; k < len; ++k) {
      const double gap = local[k] - block[k];
      if (gap > 0.0) {
        if (violations++ == 0) {
          r.witness = "vector " + std::to_string(i) + " position " +
                      std::to_string(k);
        }
        r.max_deviation = std::max(r.max_deviation, gap);
      }
    }
  }
  r.passed = violations == 0;
  return r;
}

// ---------------------------------------------------------------------------

double McResult::mean() const {
  if (trials == 0) return 0.0;
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < histogram.size(); ++k) total += k * histogram[k];
  return static_cast<double>(total) / static_cast<double>(trials);
}

double McResult::stderr_of_mean() const {
  if (trials < 2) return 0.0;
  const double mu = mean();
  double ss = 0.0;
  for (std::size_t k = 0; k < histogram.size(); ++k) {
    const double d = static_cast<double>(k) - mu;
    ss += static_cast<double>(histogram[k]) * d * d;
  }
  const double var = ss / static_cast<double>(trials - 1);
  return std::sqrt(var / static_cast<double>(trials));
}

double McResult::depth_rate(std::size_t d) const {
  if (trials == 0) return 0.0;
  std::uint64_t reached = 0;
  for (std::size_t k = d; k < histogram.size(); ++k) reached += histogram[k];
  return static_cast<double>(reached) / static_cast<double>(trials);
}

McResult monte_carlo_acceptance(Method method, const ModelPair& models,
                                const Topology& topo, const McOptions& opts) {
  topo.validate();
  const std::size_t vocab = models.target.vocab().size;
  const DraftStrategy strategy =
      (method == Method::kRrsw || method == Method::kTraversal)
          ? opts.rrsw_drafting
          : DraftStrategy::kGreedy;
  const std::size_t workers =
      std::clamp<std::size_t>(opts.workers, 1, std::max<std::size_t>(
                                                   1, opts.trials));
  std::vector<std::vector<std::uint64_t>> partial(
      workers, std::vector<std::uint64_t>(topo.depth() + 1, 0));
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&](std::size_t w) {
    const std::size_t begin = opts.trials * w / workers;
    const std::size_t end = opts.trials * (w + 1) / workers;
    TokenSeq prefix;
    try {
      for (std::size_t i = begin; i < end; ++i) {
        UniformStream rng(derive_seed(opts.master_seed, i));
        prefix = opts.prefix;
        for (std::size_t k = 0; k < opts.context_length; ++k) {
          prefix.push_back(static_cast<Token>(
              std::min<double>(rng() * static_cast<double>(vocab),
                               static_cast<double>(vocab - 1))));
        }
        const Outcome o = verify(method, models.target, models.draft, topo,
                                 prefix, rng, strategy);
        ++partial[w][o.accepted_count()];
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  McResult r;
  r.trials = opts.trials;
  r.histogram.assign(topo.depth() + 1, 0);
  for (const auto& h : partial) {
    for (std::size_t k = 0; k < h.size(); ++k) r.histogram[k] += h[k];
  }
  return r;
}

}  // namespace specverify
