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

// specverify: benchmark, sweep and oracle front end.
//
//   specverify bench    --config configs/bench.json --trials 100000
//   specverify sweep    --config configs/sweep.json --out sweep.csv
//   specverify lossless [--rational] [--mutate [NAME]]
//   specverify check    [--p-tilde X --target a,b,c --draft a,b,c --m N]
//
// Exit codes: 0 success, 1 check failure, 2 configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "specverify/experiment.hpp"

using namespace specverify;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> workers;
  std::string methods;
  std::string out;
  bool rational = false;
  std::string mutate;
  bool mutate_given = false;
  bool timing = false;
  std::optional<std::size_t> draws;
  std::string p_tilde;
  std::string target;
  std::string draft;
  std::optional<std::size_t> m;
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("SPECVERIFY_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0' || *s == '-') {
    throw Error(ErrorCode::kBadConfig,
                "SPECVERIFY_SEED: expected an unsigned integer, got '" +
                    std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ExperimentConfig build_config(Mode mode, const Flags& f) {
  ExperimentConfig cfg =
      f.config.empty() ? config_from_json_text("{}", mode, env_seed())
                       : load_config(f.config, mode, env_seed());
  if (f.seed) cfg.seed = *f.seed;
  if (f.trials) cfg.trials = *f.trials;
  if (f.workers) cfg.workers = *f.workers;
  if (!f.methods.empty()) cfg.methods = parse_method_list(f.methods);
  if (!f.out.empty()) cfg.out = f.out;
  if (f.rational) cfg.rational = true;
  if (f.timing) cfg.timing = true;
  if (f.draws) cfg.draws = *f.draws;
  if (f.mutate_given) {
    cfg.mutations.clear();
    if (f.mutate.empty() || f.mutate == "all") {
      cfg.mutations = {Mutation::kScalePTilde, Mutation::kSkipResidualRenorm,
                       Mutation::kWrongZ};
    } else {
      for (const auto& name : split(f.mutate)) {
        cfg.mutations.push_back(parse_mutation(name));
      }
    }
  }
  if (!f.target.empty() || !f.draft.empty() || !f.p_tilde.empty() || f.m) {
    NodeCheckParams node = cfg.node.value_or(NodeCheckParams{});
    if (!f.target.empty()) node.target = split(f.target);
    if (!f.draft.empty()) node.draft = split(f.draft);
    if (!f.p_tilde.empty()) node.p_tilde = f.p_tilde;
    if (f.m) node.m = *f.m;
    if (node.target.empty()) {
      throw Error(ErrorCode::kBadConfig, "target: required with inline check");
    }
    if (node.draft.empty()) {
      throw Error(ErrorCode::kBadConfig, "draft: required with inline check");
    }
    cfg.node = std::move(node);
  }
  if (cfg.workers == 0) throw Error(ErrorCode::kBadConfig, "workers: must be >= 1");
  if (cfg.trials == 0) throw Error(ErrorCode::kBadConfig, "trials: must be >= 1");
  return cfg;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadConfig:
    case ErrorCode::kInvalidDist:
    case ErrorCode::kZeroMass:
    case ErrorCode::kVocabMismatch:
    case ErrorCode::kTokenOutOfRange:
    case ErrorCode::kInsufficientSupport:
    case ErrorCode::kExactModeUnavailable:
      return true;
    default:
      return false;
  }
}

int run(Mode mode, const Flags& flags) {
  const ExperimentConfig cfg = build_config(mode, flags);
  std::ofstream file;
  if (!cfg.out.empty()) {
    file.open(cfg.out, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw Error(ErrorCode::kBadConfig, "out: cannot write '" + cfg.out + "'");
    }
  }
  std::ostream& os = cfg.out.empty() ? std::cout : file;
  switch (mode) {
    case Mode::kBench:
      write_csv(os, run_bench(cfg), cfg.timing);
      return 0;
    case Mode::kSweep:
      write_csv(os, run_sweep(cfg), cfg.timing);
      return 0;
    case Mode::kLossless:
      return run_lossless(cfg, os);
    case Mode::kCheck:
      return run_check(cfg, os);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree speculative decoding verification lab"};
  app.require_subcommand(1);
  Flags flags;
  Mode mode = Mode::kBench;

  auto common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON experiment config");
    sub->add_option("--seed", flags.seed, "master seed (default: config, "
                                          "then SPECVERIFY_SEED, then 0)");
    sub->add_option("--trials", flags.trials, "Monte Carlo trials per row");
    sub->add_option("--workers", flags.workers, "worker threads");
    sub->add_option("--method", flags.methods,
                    "comma list of univer,rrsw,greedy,traversal");
    sub->add_option("--out", flags.out, "output file (default stdout)");
    sub->add_flag("--rational", flags.rational, "exact rational arithmetic");
    sub->add_option("--mutate", flags.mutate,
                    "corrupt UniVer: scale-ptilde, skip-renorm, wrong-z, all")
        ->expected(0, 1);
    sub->add_flag("--timing", flags.timing, "add a wall_ms column");
  };

  auto* bench = app.add_subcommand("bench", "Monte Carlo acceptance length");
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over T, eps, "
                                            "topology");
  auto* lossless = app.add_subcommand("lossless", "exact lossless suite");
  auto* check = app.add_subcommand("check", "single-node property checks");
  for (auto* sub : {bench, sweep, lossless, check}) common(sub);
  check->add_option("--p-tilde", flags.p_tilde, "prefix acceptance p~");
  check->add_option("--target", flags.target, "target probabilities a,b,c");
  check->add_option("--draft", flags.draft, "draft probabilities a,b,c");
  check->add_option("--m", flags.m, "children per node");
  check->add_option("--draws", flags.draws, "random draws per sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (bench->parsed()) mode = Mode::kBench;
  if (sweep->parsed()) mode = Mode::kSweep;
  if (lossless->parsed()) mode = Mode::kLossless;
  if (check->parsed()) mode = Mode::kCheck;
  for (auto* sub : {bench, sweep, lossless, check}) {
    if (sub->parsed() && sub->count("--mutate") > 0) flags.mutate_given = true;
  }

  try {
    return run(mode, flags);
  } catch (const Error& e) {
    std::cerr << "specverify: " << e.what() << '\n';
    return is_config_error(e.code()) ? kExitConfig : kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "specverify: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}
