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

// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.
// Tolerances are fixed here, not read from configs.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "specverify/experiment.hpp"
#include "specverify/oracle.hpp"

using namespace specverify;
namespace fs = std::filesystem;

namespace {

constexpr double kLosslessTol = 1e-9;
constexpr double kSuperioritySlack = 1e-12;
constexpr double kZ95 = 1.959963984540054;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int n, const Outcome& o) {
  std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  "
            << o.detail << std::endl;
  if (!o.pass) ++failures;
}

// Runs a criterion; exceptions count as failure.
void run(int n, const std::function<Outcome()>& body) {
  try {
    report(n, body());
  } catch (const std::exception& e) {
    report(n, {false, std::string("exception: ") + e.what()});
  }
}

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  const std::string cmd = std::string(SPECVERIFY_CLI) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config_path(const std::string& name) {
  return std::string(SPECVERIFY_CONFIG_DIR) + "/" + name;
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome lossless_all() {
  const auto t0 = Clock::now();
  const auto stock = stock_lossless_suite();
  SuiteOptions opts;
  double worst = 0;
  std::size_t checks = 0;
  std::string witness;
  for (const auto& r : run_lossless_suite(stock, opts)) {
    ++checks;
    worst = std::max(worst, r.max_deviation);
    if (!r.passed && witness.empty()) witness = r.name + " " + r.witness;
  }
  opts.rational = true;
  const auto exact = rational_lossless_suite();
  double worst_exact = 0;
  for (const auto& r : run_lossless_suite(exact, opts)) {
    ++checks;
    worst_exact = std::max(worst_exact, r.max_deviation);
    if (r.max_deviation != 0.0 && witness.empty()) witness = r.name;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = stock.size() >= 20 && worst <= kLosslessTol && worst_exact == 0.0 &&
           witness.empty() && secs < 300.0;
  o.detail = std::to_string(stock.size()) + " configs x 3 methods, " +
             std::to_string(exact.size()) + " rational configs; max tv " +
             fmt(worst) + ", rational max " + fmt(worst_exact) + ", " +
             fmt(secs, 3) + " s" + (witness.empty() ? "" : "; " + witness);
  return o;
}

Outcome local_lossless() {
  const auto r = local_lossless_sweep(200, 2026);
  return {r.passed && r.max_deviation <= kLosslessTol,
          "200 draws + Z=0 case, max deviation " + fmt(r.max_deviation) +
              (r.passed ? "" : "; " + r.witness)};
}

Outcome conditional_optimality() {
  const auto r = conditional_optimality_sweep(200, 2026);
  return {r.passed && r.max_deviation <= kLosslessTol,
          "200 draws, closed form / ot bound / greedy at p~=1, max deviation " +
              fmt(r.max_deviation) + (r.passed ? "" : "; " + r.witness)};
}

// Enumerable configurations for the exact comparisons.
std::vector<OracleCase> superiority_cases() {
  const std::vector<std::vector<std::size_t>> widths = {
      {1}, {2}, {3}, {1, 1}, {2, 1}, {2, 2}, {3, 2}, {1, 1, 1}, {2, 2, 2}};
  const std::vector<double> eps = {0.3, 0.5, 0.7, 1.0};
  std::vector<OracleCase> out;
  for (std::size_t i = 0; i < 2 * widths.size() * eps.size(); ++i) {
    OracleCase c;
    c.model.vocab_size = 4 + (i % 3);
    c.model.family =
        i % 2 == 1 ? ModelFamily::kMarkov1 : ModelFamily::kSeededRandom;
    c.model.seed = 5000 + i;
    c.model.epsilon = eps[i % eps.size()];
    c.topo.widths = widths[(i / eps.size()) % widths.size()];
    if (i % 3 == 2) c.prefix = {static_cast<Token>(i % 4)};
    c.name = "sup" + std::to_string(i);
    out.push_back(std::move(c));
  }
  return out;
}

Outcome superiority() {
  const auto cases = superiority_cases();
  std::size_t checks = 0, failed = 0;
  double worst = 0;
  std::string witness;
  for (const auto& c : cases) {
    for (double root : {1.0, 0.25, 0.5, 0.75}) {
      const auto r = check_superiority(c, root, kSuperioritySlack);
      ++checks;
      worst = std::max(worst, r.max_deviation);
      if (!r.passed) {
        ++failed;
        if (witness.empty()) witness = r.name + " " + r.witness;
      }
    }
  }
  return {cases.size() >= 50 && failed == 0,
          std::to_string(cases.size()) + " configs x roots {1,.25,.5,.75}, " +
              std::to_string(failed) + "/" + std::to_string(checks) +
              " violations, max shortfall " + fmt(worst) +
              (witness.empty() ? "" : "; " + witness)};
}

struct Pair {
  double mean = 0, se = 0;
};

// Difference of two Monte Carlo means. Both runs share per-trial seeds, so
// the errors are positively correlated and the summed variance is an upper
// bound on the variance of the difference.
Pair difference(const ResultRow& a, const ResultRow& b) {
  return {a.tau - b.tau, std::hypot(a.stderr_tau, b.stderr_tau)};
}

const ResultRow& row(const std::vector<ResultRow>& rows, Method m) {
  for (const auto& r : rows) {
    if (r.method == m) return r;
  }
  throw Error(ErrorCode::kBadConfig, "missing row");
}

ExperimentConfig bench_config() {
  return load_config(config_path("bench.json"), Mode::kBench, std::nullopt);
}

std::string ci(const Pair& p) {
  return fmt(p.mean, 4) + " [" + fmt(p.mean - kZ95 * p.se, 4) + ", " +
         fmt(p.mean + kZ95 * p.se, 4) + "]";
}

Pair gap_t1, gap_t03;

Outcome empirical_ordering() {
  auto cfg = bench_config();
  const auto t0 = Clock::now();
  const auto rows = run_bench(cfg);
  const double secs = seconds_since(t0);
  const auto& u = row(rows, Method::kUniver);
  const auto ur = difference(u, row(rows, Method::kRrsw));
  const auto ug = difference(u, row(rows, Method::kGreedy));
  gap_t1 = ur;
  const bool ok = cfg.model.vocab_size == 50 && cfg.model.epsilon == 0.5 &&
                  cfg.model.temperature == 1.0 &&
                  cfg.topology.widths == std::vector<std::size_t>{2, 2, 2, 2} &&
                  cfg.trials == 100000;
  Outcome o;
  o.pass = ok && ur.mean - kZ95 * ur.se > 0 && ug.mean + kZ95 * ug.se >= 0 &&
           secs < 120.0;
  o.detail = "tau univer " + fmt(u.tau, 5) + "; univer-rrsw " + ci(ur) +
             "; univer-greedy " + ci(ug) + "; " + fmt(secs, 3) + " s" +
             (ok ? "" : "; bench config drifted");
  return o;
}

Outcome temperature_trend() {
  auto cfg = bench_config();
  cfg.model.temperature = 0.3;
  cfg.methods = {Method::kUniver, Method::kRrsw};
  const auto rows = run_bench(cfg);
  gap_t03 = difference(row(rows, Method::kUniver), row(rows, Method::kRrsw));
  const bool separated = gap_t03.mean + kZ95 * gap_t03.se <
                         gap_t1.mean - kZ95 * gap_t1.se;
  return {gap_t1.se > 0 && separated,
          "univer-rrsw at T=0.3 " + ci(gap_t03) + " vs T=1.0 " + ci(gap_t1) +
              (separated ? "; intervals disjoint" : "; intervals overlap")};
}

Outcome depth_trend() {
  std::size_t monotone = 0, total = 0;
  std::ostringstream per;
  for (std::size_t i = 0; i < 12; ++i) {
    ModelPairConfig mc;
    mc.vocab_size = 4 + (i % 3);
    mc.family = i % 2 == 0 ? ModelFamily::kSeededRandom : ModelFamily::kMarkov1;
    mc.seed = 9000 + i;
    mc.epsilon = i < 6 ? 0.5 : 0.7;
    const auto models = make_model_pair(mc);
    std::vector<double> gaps;
    for (std::size_t d = 1; d <= 3; ++d) {
      const Topology topo{std::vector<std::size_t>(d, 2)};
      const double u = exact_acceptance_length<double>(
          VerifierSpec{Method::kUniver}, models.target, models.draft, topo, {});
      const double g = exact_acceptance_length<double>(
          VerifierSpec{Method::kGreedy}, models.target, models.draft, topo, {});
      gaps.push_back(u - g);
    }
    const bool up = gaps[1] >= gaps[0] - kSuperioritySlack &&
                    gaps[2] >= gaps[1] - kSuperioritySlack;
    monotone += up;
    ++total;
    std::cout << "  depth gap " << family_name(mc.family) << " vocab="
              << mc.vocab_size << " seed=" << mc.seed << " eps=" << mc.epsilon
              << ": " << fmt(gaps[0]) << " " << fmt(gaps[1]) << " "
              << fmt(gaps[2]) << (up ? "  non-decreasing" : "  decreasing")
              << '\n';
  }
  per << monotone << "/" << total << " configs non-decreasing over D=1,2,3";
  return {total >= 10 && 2 * monotone > total, per.str()};
}

Outcome block_local() {
  const auto r = block_local_sweep(10000, 2026);
  return {r.passed && r.max_deviation == 0.0,
          "10000 ratio vectors, max shortfall " + fmt(r.max_deviation) +
              (r.passed ? "" : "; " + r.witness)};
}

Outcome mutation_sensitivity() {
  std::string detail;
  bool ok = cli("lossless").code == 0;
  detail += std::string("clean exit ") + (ok ? "0" : "!=0");
  for (const char* m : {"scale-ptilde", "skip-renorm", "wrong-z"}) {
    const auto r = cli(std::string("lossless --mutate ") + m);
    ok = ok && r.code == 1;
    detail += std::string("; ") + m + " exit " + std::to_string(r.code);
  }
  return {ok, detail};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() /
                       ("specverify-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::string> commands = {
      "bench --config " + config_path("bench.json") + " --trials 20000",
      "sweep --config " + config_path("sweep.json") + " --trials 2000",
      "lossless --config " + config_path("lossless.json"),
      "lossless --rational",
      "check --config " + config_path("check.json"),
      "check --seed 11",
  };
  std::string detail;
  bool ok = true;
  for (const auto& c : commands) {
    const auto a = cli(c + " --workers 1");
    const auto b = cli(c + " --workers 3");
    const std::string fa = (dir / "a.out").string();
    const std::string fb = (dir / "b.out").string();
    const auto ao = cli(c + " --workers 2 --out " + fa);
    const auto bo = cli(c + " --workers 4 --out " + fb);
    auto slurp = [](const std::string& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      return s.str();
    };
    const bool same = a.code == b.code && a.code == 0 && !a.out.empty() &&
                      a.out == b.out && ao.code == 0 && bo.code == 0 &&
                      slurp(fa) == slurp(fb) && slurp(fa) == a.out;
    ok = ok && same;
    if (!same) detail += "differs: " + c + "; ";
  }
  fs::remove_all(dir);
  return {ok, std::to_string(commands.size()) +
                  " commands identical across workers 1/2/3/4" +
                  (detail.empty() ? "" : "; " + detail)};
}

}  // namespace

int main() {
  run(1, lossless_all);
  run(2, local_lossless);
  run(3, conditional_optimality);
  run(4, superiority);
  run(5, empirical_ordering);
  run(6, temperature_trend);
  run(7, depth_trend);
  run(8, block_local);
  run(9, mutation_sensitivity);
  run(10, determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) +
                                                            " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
