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

// Experiment configuration, result tables and the four CLI commands.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "specverify/baselines.hpp"
#include "specverify/models.hpp"
#include "specverify/oracle.hpp"
#include "specverify/tree.hpp"
#include "specverify/univer.hpp"

namespace specverify {

enum class Mode { kBench, kSweep, kLossless, kCheck };

std::string_view mode_name(Mode mode);

// Inline single-node parameters for `check`. Probabilities are kept as text
// so rational mode can parse them exactly ("1/3", "0.25").
struct NodeCheckParams {
  std::string p_tilde = "1";
  std::vector<std::string> target;
  std::vector<std::string> draft;
  std::size_t m = 1;
};

struct ExperimentConfig {
  Mode mode = Mode::kBench;
  ModelPairConfig model;
  Topology topology{{2, 2}};
  std::vector<Method> methods = {Method::kUniver, Method::kRrsw,
                                 Method::kGreedy};
  // Sweep axes; bench uses model.temperature / model.epsilon / topology.
  std::vector<double> temperatures;
  std::vector<double> epsilons;
  std::vector<Topology> topologies;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t context_length = 2;
  TokenSeq prefix;
  DraftStrategy rrsw_drafting = DraftStrategy::kGreedy;
  std::string out;  // empty: stdout
  bool timing = false;
  // lossless / check
  bool rational = false;
  std::vector<Mutation> mutations;
  std::size_t draws = 200;
  std::optional<NodeCheckParams> node;

  // Throws BadConfig naming the offending field.
  void validate() const;
};

// Reads the JSON config; unknown keys and wrong types are BadConfig errors
// naming the key path. `env_seed` is used when the file sets no seed.
ExperimentConfig load_config(const std::string& path, Mode mode,
                             std::optional<std::uint64_t> env_seed);
ExperimentConfig config_from_json_text(const std::string& text, Mode mode,
                                       std::optional<std::uint64_t> env_seed);

struct ResultRow {
  Method method = Method::kUniver;
  std::string topology;
  double temperature = 1.0;
  double epsilon = 0.0;
  double tau = 0.0;
  double stderr_tau = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> depth_rates;  // rate_d1..rate_dD
  double wall_ms = 0.0;
};

std::vector<ResultRow> run_bench(const ExperimentConfig& cfg);
std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg);

// Rows in order; `delta_vs_rrsw` is recomputed from the printed tau values
// of the rrsw row with the same (topology, temperature, epsilon).
void write_csv(std::ostream& os, const std::vector<ResultRow>& rows,
               bool timing);

// Writes JSON lines; returns the process exit code (0 all pass, 1 otherwise).
int run_lossless(const ExperimentConfig& cfg, std::ostream& os);
int run_check(const ExperimentConfig& cfg, std::ostream& os);

// Exact value of a decimal ("0.25") or fraction ("1/3") literal.
Rational parse_rational(const std::string& text);

}  // namespace specverify
