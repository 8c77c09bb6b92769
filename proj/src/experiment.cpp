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

#include "specverify/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace specverify {

using nlohmann::json;

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kBench:
      return "bench";
    case Mode::kSweep:
      return "sweep";
    case Mode::kLossless:
      return "lossless";
    case Mode::kCheck:
      return "check";
  }
  return "unknown";
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kBadConfig, field + ": " + what);
}

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(where(""), "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number()) bad(where(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <class U>
  void unsigned_int(const std::string& key, U& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_unsigned()) {
        bad(where(key), "expected a non-negative integer");
      }
      out = static_cast<U>(v->get<std::uint64_t>());
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) bad(where(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) bad(where(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) bad(where(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Topology topology_from_json(const json& v, const std::string& field) {
  try {
    if (v.is_string()) return parse_topology(v.get<std::string>());
    if (v.is_array()) {
      Topology t;
      for (const auto& w : v) {
        if (!w.is_number_unsigned()) bad(field, "widths must be integers");
        t.widths.push_back(w.get<std::size_t>());
      }
      t.validate();
      return t;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBadConfig &&
        std::string(e.what()).rfind(field, 0) == 0) {
      throw;
    }
    bad(field, e.what());
  }
  bad(field, "expected \"2x2\" or [2, 2]");
}

std::vector<double> number_list(const json& v, const std::string& field) {
  if (!v.is_array()) bad(field, "expected a list of numbers");
  if (v.empty()) bad(field, "empty list");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) bad(field, "expected a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<Method> methods_from_json(const json& v, const std::string& field) {
  try {
    if (v.is_string()) return parse_method_list(v.get<std::string>());
    if (v.is_array()) {
      std::vector<Method> out;
      for (const auto& m : v) {
        if (!m.is_string()) bad(field, "expected method names");
        out.push_back(parse_method(m.get<std::string>()));
      }
      if (out.empty()) bad(field, "empty list");
      return out;
    }
  } catch (const Error& e) {
    if (std::string(e.what()).rfind(field, 0) == 0) throw;
    bad(field, e.what());
  }
  bad(field, "expected a list of method names");
}

std::vector<std::string> prob_list(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) bad(field, "expected a list of probabilities");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (x.is_string()) {
      out.push_back(x.get<std::string>());
    } else if (x.is_number()) {
      out.push_back(x.dump());
    } else {
      bad(field, "expected numbers or \"a/b\" strings");
    }
  }
  return out;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text, Mode mode,
                                       std::optional<std::uint64_t> env_seed) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    bad("config", std::string("not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.mode = mode;
  if (env_seed) cfg.seed = *env_seed;

  ObjectReader r(root, "");
  if (const json* m = r.get("model")) {
    ObjectReader mr(*m, "model");
    mr.unsigned_int("vocab", cfg.model.vocab_size);
    std::string family(family_name(cfg.model.family));
    mr.string("family", family);
    cfg.model.family = parse_family(family);
    mr.unsigned_int("seed", cfg.model.seed);
    mr.number("epsilon", cfg.model.epsilon);
    mr.number("temperature", cfg.model.temperature);
    mr.number("concentration", cfg.model.concentration);
    mr.boolean("exact_weights", cfg.model.exact_weights);
    mr.finish();
  }
  if (const json* t = r.get("topology")) {
    cfg.topology = topology_from_json(*t, "topology");
  }
  if (const json* m = r.get("methods")) {
    cfg.methods = methods_from_json(*m, "methods");
  }
  if (const json* t = r.get("temperatures")) {
    cfg.temperatures = number_list(*t, "temperatures");
  }
  if (const json* e = r.get("epsilons")) {
    cfg.epsilons = number_list(*e, "epsilons");
  }
  if (const json* ts = r.get("topologies")) {
    if (!ts->is_array()) bad("topologies", "expected a list");
    if (ts->empty()) bad("topologies", "empty list");
    for (std::size_t i = 0; i < ts->size(); ++i) {
      cfg.topologies.push_back(
          topology_from_json((*ts)[i], "topologies[" + std::to_string(i) + "]"));
    }
  }
  r.unsigned_int("trials", cfg.trials);
  r.unsigned_int("seed", cfg.seed);
  r.unsigned_int("workers", cfg.workers);
  r.unsigned_int("context_length", cfg.context_length);
  if (const json* p = r.get("prefix")) {
    if (!p->is_array()) bad("prefix", "expected a list of token ids");
    for (const auto& t : *p) {
      if (!t.is_number_unsigned()) bad("prefix", "expected token ids");
      cfg.prefix.push_back(static_cast<Token>(t.get<std::uint64_t>()));
    }
  }
  std::string drafting(strategy_name(cfg.rrsw_drafting));
  r.string("rrsw_drafting", drafting);
  cfg.rrsw_drafting = parse_strategy(drafting);
  r.string("out", cfg.out);
  r.boolean("timing", cfg.timing);
  r.boolean("rational", cfg.rational);
  if (const json* ms = r.get("mutations")) {
    if (!ms->is_array()) bad("mutations", "expected a list of names");
    for (const auto& m : *ms) {
      if (!m.is_string()) bad("mutations", "expected a list of names");
      cfg.mutations.push_back(parse_mutation(m.get<std::string>()));
    }
  }
  r.unsigned_int("draws", cfg.draws);
  if (const json* n = r.get("node")) {
    ObjectReader nr(*n, "node");
    NodeCheckParams node;
    if (const json* p = nr.get("p_tilde")) {
      if (p->is_string()) {
        node.p_tilde = p->get<std::string>();
      } else if (p->is_number()) {
        node.p_tilde = p->dump();
      } else {
        bad("node.p_tilde", "expected a number");
      }
    }
    if (const json* t = nr.get("target")) {
      node.target = prob_list(*t, "node.target");
    }
    if (const json* d = nr.get("draft")) {
      node.draft = prob_list(*d, "node.draft");
    }
    nr.unsigned_int("m", node.m);
    nr.finish();
    cfg.node = std::move(node);
  }
  r.finish();

  if (cfg.temperatures.empty()) cfg.temperatures = {cfg.model.temperature};
  if (cfg.epsilons.empty()) cfg.epsilons = {cfg.model.epsilon};
  if (cfg.topologies.empty()) cfg.topologies = {cfg.topology};
  return cfg;
}

ExperimentConfig load_config(const std::string& path, Mode mode,
                             std::optional<std::uint64_t> env_seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("config", "cannot read '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_json_text(text.str(), mode, env_seed);
}

void ExperimentConfig::validate() const {
  model.validate();
  topology.validate();
  if (methods.empty()) bad("methods", "empty list");
  if (trials == 0) bad("trials", "must be >= 1");
  if (workers == 0) bad("workers", "must be >= 1");
  if (temperatures.empty()) bad("temperatures", "empty list");
  if (epsilons.empty()) bad("epsilons", "empty list");
  if (topologies.empty()) bad("topologies", "empty list");
  for (double t : temperatures) {
    if (!(t > 0.0) || !std::isfinite(t)) bad("temperatures", "must be > 0");
  }
  for (double e : epsilons) {
    if (!(e >= 0.0 && e <= 1.0)) bad("epsilons", "must lie in [0, 1]");
  }
  for (const auto& t : topologies) t.validate();
  for (Token t : prefix) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.vocab_size) {
      bad("prefix", "token " + std::to_string(t) + " outside the vocabulary");
    }
  }
  for (const auto& t : topologies) {
    for (std::size_t w : t.widths) {
      if (w > model.vocab_size) {
        bad("topologies", "width " + std::to_string(w) + " exceeds vocab " +
                              std::to_string(model.vocab_size));
      }
    }
  }
  if (node) {
    if (node->target.size() != node->draft.size()) {
      bad("node.draft", "length differs from node.target");
    }
    if (node->m == 0) bad("node.m", "must be >= 1");
    if (node->m > node->draft.size()) bad("node.m", "exceeds the vocabulary");
  }
}

// ---------------------------------------------------------------------------

namespace {

ResultRow measure(const ExperimentConfig& cfg, Method method,
                  const ModelPairConfig& model, const Topology& topo) {
  const ModelPair models = make_model_pair(model);
  McOptions opts;
  opts.trials = cfg.trials;
  opts.master_seed = cfg.seed;
  opts.workers = cfg.workers;
  opts.context_length = cfg.context_length;
  opts.prefix = cfg.prefix;
  opts.rrsw_drafting = cfg.rrsw_drafting;
  const auto start = std::chrono::steady_clock::now();
  const McResult mc = monte_carlo_acceptance(method, models, topo, opts);
  const auto stop = std::chrono::steady_clock::now();

  ResultRow row;
  row.method = method;
  row.topology = topo.tag();
  row.temperature = model.temperature;
  row.epsilon = model.epsilon;
  row.tau = mc.mean();
  row.stderr_tau = mc.stderr_of_mean();
  row.trials = mc.trials;
  row.seed = cfg.seed;
  for (std::size_t d = 1; d <= topo.depth(); ++d) {
    row.depth_rates.push_back(mc.depth_rate(d));
  }
  row.wall_ms =
      std::chrono::duration<double, std::milli>(stop - start).count();
  return row;
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string shortest(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::vector<ResultRow> run_bench(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  for (Method m : cfg.methods) {
    rows.push_back(measure(cfg, m, cfg.model, cfg.topology));
  }
  return rows;
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  for (double t : cfg.temperatures) {
    for (double e : cfg.epsilons) {
      ModelPairConfig model = cfg.model;
      model.temperature = t;
      model.epsilon = e;
      model.validate();
      for (const auto& topo : cfg.topologies) {
        for (Method m : cfg.methods) {
          rows.push_back(measure(cfg, m, model, topo));
        }
      }
    }
  }
  return rows;
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows,
               bool timing) {
  std::size_t depth = 0;
  for (const auto& r : rows) depth = std::max(depth, r.depth_rates.size());
  os << "method,topology,temperature,epsilon,tau,stderr,trials,seed,"
        "delta_vs_rrsw";
  for (std::size_t d = 1; d <= depth; ++d) os << ",rate_d" << d;
  if (timing) os << ",wall_ms";
  os << '\n';

  auto same_setting = [](const ResultRow& a, const ResultRow& b) {
    return a.topology == b.topology && a.temperature == b.temperature &&
           a.epsilon == b.epsilon;
  };
  for (const auto& r : rows) {
    const std::string tau = fixed6(r.tau);
    std::string delta;
    for (const auto& base : rows) {
      if (base.method == Method::kRrsw && same_setting(base, r)) {
        const double b = std::strtod(fixed6(base.tau).c_str(), nullptr);
        const double t = std::strtod(tau.c_str(), nullptr);
        if (b > 0.0) delta = fixed6((t - b) / b);
        break;
      }
    }
    os << method_name(r.method) << ',' << r.topology << ','
       << shortest(r.temperature) << ',' << shortest(r.epsilon) << ',' << tau
       << ',' << fixed6(r.stderr_tau) << ',' << r.trials << ',' << r.seed
       << ',' << delta;
    for (std::size_t d = 0; d < depth; ++d) {
      os << ',';
      if (d < r.depth_rates.size()) os << fixed6(r.depth_rates[d]);
    }
    if (timing) os << ',' << fixed6(r.wall_ms);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

int run_lossless(const ExperimentConfig& cfg, std::ostream& os) {
  if (cfg.workers == 0) bad("workers", "must be >= 1");
  if (cfg.methods.empty()) bad("methods", "empty list");
  const auto cases =
      cfg.rational ? rational_lossless_suite() : stock_lossless_suite();
  std::vector<Mutation> mutations = cfg.mutations;
  if (mutations.empty()) mutations.push_back(Mutation::kNone);
  bool all_passed = true;
  std::size_t failures = 0;
  std::size_t total = 0;
  for (Mutation mutation : mutations) {
    SuiteOptions opts;
    opts.methods = cfg.methods;
    opts.mutation = mutation;
    opts.rational = cfg.rational;
    opts.workers = cfg.workers;
    for (const auto& r : run_lossless_suite(cases, opts)) {
      os << r.to_json_line() << '\n';
      ++total;
      if (!r.passed) {
        all_passed = false;
        ++failures;
      }
    }
  }
  std::cerr << "lossless: " << (total - failures) << "/" << total
            << " checks passed\n";
  return all_passed ? 0 : 1;
}

Rational parse_rational(const std::string& text) {
  auto digits = [&text](const std::string& s) {
    if (s.empty()) bad("probability", "cannot parse '" + text + "'");
    for (char c : s) {
      if (c < '0' || c > '9') bad("probability", "cannot parse '" + text + "'");
    }
    return Rational(boost::multiprecision::cpp_int(s));
  };
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const Rational den = digits(text.substr(slash + 1));
    if (den == 0) bad("probability", "zero denominator in '" + text + "'");
    return digits(text.substr(0, slash)) / den;
  }
  if (const auto dot = text.find('.'); dot != std::string::npos) {
    const std::string whole = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    Rational scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const Rational w = whole.empty() ? Rational(0) : digits(whole);
    const Rational f = frac.empty() ? Rational(0) : digits(frac);
    return w + f / scale;
  }
  return digits(text);
}

int run_check(const ExperimentConfig& cfg, std::ostream& os) {
  std::vector<CheckReport> reports;
  if (cfg.node) {
    const auto& n = *cfg.node;
    if (n.target.size() != n.draft.size()) {
      bad("node.draft", "length differs from node.target");
    }
    if (n.m == 0 || n.m > n.draft.size()) bad("node.m", "out of range");
    if (cfg.rational) {
      std::vector<Rational> t, d;
      for (const auto& s : n.target) t.push_back(parse_rational(s));
      for (const auto& s : n.draft) d.push_back(parse_rational(s));
      const Rational pt = parse_rational(n.p_tilde);
      if (pt > 1) bad("node.p_tilde", "must lie in [0, 1]");
      const auto target = ExactDist::from_probs(std::move(t));
      const auto draft = ExactDist::from_probs(std::move(d));
      reports.push_back(check_local_lossless<Rational>(pt, target, draft, n.m));
      reports.push_back(
          check_conditional_optimality<Rational>(pt, target, draft, n.m));
    } else {
      std::vector<double> t, d;
      for (const auto& s : n.target) t.push_back(to_double(parse_rational(s)));
      for (const auto& s : n.draft) d.push_back(to_double(parse_rational(s)));
      const double pt = to_double(parse_rational(n.p_tilde));
      if (pt > 1.0) bad("node.p_tilde", "must lie in [0, 1]");
      const auto target = Dist::from_probs(std::move(t));
      const auto draft = Dist::from_probs(std::move(d));
      reports.push_back(check_local_lossless<double>(pt, target, draft, n.m));
      reports.push_back(
          check_conditional_optimality<double>(pt, target, draft, n.m));
    }
  } else {
    reports.push_back(local_lossless_sweep(cfg.draws, cfg.seed));
    reports.push_back(conditional_optimality_sweep(cfg.draws, cfg.seed));
    reports.push_back(block_local_sweep(10000, cfg.seed));
  }
  bool ok = true;
  for (const auto& r : reports) {
    os << r.to_json_line() << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace specverify
