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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "specverify/experiment.hpp"

namespace specverify {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is discarded unless captured.
RunResult run_cli(const std::string& args, bool merge_stderr = false) {
  const std::string cmd = std::string(SPECVERIFY_CLI) + " " + args +
                          (merge_stderr ? " 2>&1" : " 2>/dev/null");
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("specverify-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string expect_bad_config(const std::string& json) {
  try {
    config_from_json_text(json, Mode::kBench, std::nullopt).validate();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadConfig);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << json;
  return "";
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(expect_bad_config(R"({"trails": 10})").find("trails"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"model": {"vocab": "ten"}})").find("model.vocab"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"model": {"colour": 1}})").find("model.colour"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"temperatures": []})").find("temperatures"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"methods": ["univer", "spectr"]})").find("method"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"topology": "2x0"})").find("topology"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"model": {"epsilon": 2}})").find("epsilon"),
            std::string::npos);
  EXPECT_NE(expect_bad_config(R"({"rrsw_drafting": "beam"})").find("rrsw_drafting"),
            std::string::npos);
  expect_bad_config("{not json");
}

TEST(Config, DefaultsAndSeedFallback) {
  auto cfg = config_from_json_text("{}", Mode::kBench, 55);
  EXPECT_EQ(cfg.seed, 55u);
  cfg = config_from_json_text(R"({"seed": 3})", Mode::kBench, 55);
  EXPECT_EQ(cfg.seed, 3u);
  cfg = config_from_json_text(
      R"({"topology": [3, 2], "methods": "univer,greedy", "prefix": [1, 2]})",
      Mode::kBench, std::nullopt);
  EXPECT_EQ(cfg.topology.tag(), "3x2");
  EXPECT_EQ(cfg.methods.size(), 2u);
  EXPECT_EQ(cfg.prefix, (TokenSeq{1, 2}));
}

TEST(Config, ParseRational) {
  EXPECT_EQ(parse_rational("1/3"), Rational(1, 3));
  EXPECT_EQ(parse_rational("0.25"), Rational(1, 4));
  EXPECT_EQ(parse_rational(".5"), Rational(1, 2));
  EXPECT_EQ(parse_rational("1"), Rational(1));
  EXPECT_THROW(parse_rational("1/0"), Error);
  EXPECT_THROW(parse_rational("-1"), Error);
  EXPECT_THROW(parse_rational("abc"), Error);
}

TEST(Csv, FormatAndDelta) {
  ResultRow a{Method::kRrsw, "2x2", 1.0, 0.5, 2.0, 0.01, 10, 4, {0.9, 0.5}};
  ResultRow b{Method::kUniver, "2x2", 1.0, 0.5, 2.5, 0.02, 10, 4, {0.95, 0.6}};
  std::ostringstream os;
  write_csv(os, {a, b}, false);
  EXPECT_EQ(os.str(),
            "method,topology,temperature,epsilon,tau,stderr,trials,seed,"
            "delta_vs_rrsw,rate_d1,rate_d2\n"
            "rrsw,2x2,1,0.5,2.000000,0.010000,10,4,0.000000,0.900000,0.500000\n"
            "univer,2x2,1,0.5,2.500000,0.020000,10,4,0.250000,0.950000,0.600000\n");
}

TEST(Csv, NoRrswRowLeavesDeltaEmpty) {
  ResultRow b{Method::kUniver, "2", 0.3, 0, 1.0, 0.0, 5, 1, {1.0}};
  std::ostringstream os;
  write_csv(os, {b}, false);
  EXPECT_NE(os.str().find("univer,2,0.3,0,1.000000,0.000000,5,1,,1.000000\n"),
            std::string::npos);
}

TEST(Bench, PerfectDrafterGivesDepth) {
  auto cfg = config_from_json_text(
      R"({"model": {"vocab": 6, "epsilon": 0}, "topology": "1x1x1",
          "methods": ["univer"], "trials": 500})",
      Mode::kBench, std::nullopt);
  const auto rows = run_bench(cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].tau, 3.0);
}

TEST(Sweep, CartesianOrder) {
  auto cfg = config_from_json_text(
      R"({"model": {"vocab": 6}, "methods": ["rrsw", "univer"],
          "temperatures": [0.5, 1.0], "epsilons": [0.2],
          "topologies": ["2", "2x2"], "trials": 50})",
      Mode::kSweep, std::nullopt);
  const auto rows = run_sweep(cfg);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].temperature, 0.5);
  EXPECT_EQ(rows[0].topology, "2");
  EXPECT_EQ(rows[1].method, Method::kUniver);
  EXPECT_EQ(rows[2].topology, "2x2");
  EXPECT_EQ(rows[4].temperature, 1.0);
}

// -------------------------------------------------------------------------
// The binary itself.

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli("bench --config " + dir.write("a.json", R"({"x": 1})")).code, 2);
  EXPECT_EQ(run_cli("bench --config /nonexistent/cfg.json").code, 2);
  EXPECT_EQ(run_cli("bench --method nope --trials 5").code, 2);
  EXPECT_EQ(run_cli("bench --workers 0 --trials 5").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("sweep --config " +
                    dir.write("b.json", R"({"temperatures": []})"))
                .code,
            2);
  EXPECT_EQ(run_cli("check --p-tilde 1 --target 0.2,0.5,0.3 --draft 0.6,0.4 --m 2")
                .code,
            2);
}

TEST(Cli, BadEnvSeedIsConfigError) {
  const int status = std::system(("SPECVERIFY_SEED=abc " + std::string(SPECVERIFY_CLI) +
                                  " bench --trials 5 >/dev/null 2>&1")
                                     .c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(Cli, DiagnosticNamesField) {
  TempDir dir;
  const auto r = run_cli(
      "bench --config " + dir.write("c.json", R"({"model": {"vocab": 1}})"), true);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("model.vocab"), std::string::npos) << r.out;
}

TEST(Cli, SeedPrecedence) {
  TempDir dir;
  const std::string cfg = dir.write("s.json", R"({"seed": 11, "trials": 20})");
  auto seed_of = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::vector<std::string> cells;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells.at(7);
  };
  EXPECT_EQ(seed_of(run_cli("bench --config " + cfg).out), "11");
  EXPECT_EQ(seed_of(run_cli("bench --config " + cfg + " --seed 12").out), "12");
  const auto env = run_cli("bench --trials 20");
  EXPECT_EQ(seed_of(env.out), "0");
  FILE* p = popen(("SPECVERIFY_SEED=13 " + std::string(SPECVERIFY_CLI) +
                   " bench --trials 20 2>/dev/null")
                      .c_str(),
                  "r");
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  pclose(p);
  EXPECT_EQ(seed_of(out), "13");
}

TEST(Cli, BenchCsvIsDeterministicAndLf) {
  TempDir dir;
  const std::string cfg = dir.write("d.json", R"({
    "model": {"vocab": 12, "seed": 3, "epsilon": 0.5},
    "topology": "2x2", "trials": 400, "seed": 8})");
  const auto a = run_cli("bench --config " + cfg + " --workers 1");
  const auto b = run_cli("bench --config " + cfg + " --workers 5");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.find('\r'), std::string::npos);
  EXPECT_EQ(a.out.rfind("method,topology,", 0), 0u);
  ASSERT_EQ(run_cli("bench --config " + cfg + " --out " + dir.file("o.csv")).code, 0);
  EXPECT_EQ(slurp(dir.file("o.csv")), a.out);
}

TEST(Cli, LosslessSuite) {
  const auto ok = run_cli("lossless --workers 4");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(ok.out.find("\"passed\":false"), std::string::npos);
  EXPECT_NE(ok.out.find("\"passed\":true"), std::string::npos);

  const auto exact = run_cli("lossless --rational");
  EXPECT_EQ(exact.code, 0);
  EXPECT_EQ(exact.out.find("\"max_deviation\":0.0,") != std::string::npos, true);
  std::istringstream lines(exact.out);
  std::string line;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find("\"max_deviation\":0.0,"), std::string::npos) << line;
  }

  for (const char* m : {"scale-ptilde", "skip-renorm", "wrong-z"}) {
    const auto bad = run_cli(std::string("lossless --mutate ") + m);
    EXPECT_EQ(bad.code, 1) << m;
    EXPECT_NE(bad.out.find("\"passed\":false"), std::string::npos) << m;
  }
  EXPECT_EQ(run_cli("lossless --mutate bogus").code, 2);
}

TEST(Cli, InlineCheck) {
  const auto d = run_cli("check --p-tilde 1 --target 0.2,0.5,0.3 "
                         "--draft 0.6,0.3,0.1 --m 2");
  EXPECT_EQ(d.code, 0) << d.out;
  const auto r = run_cli("check --rational --p-tilde 1/3 --target 1/5,1/2,3/10 "
                         "--draft 3/5,3/10,1/10 --m 2");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"max_deviation\":0.0"), std::string::npos);
}

TEST(Cli, ShippedConfigsLoad) {
  for (const auto& entry : fs::directory_iterator(SPECVERIFY_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const std::string text = slurp(entry.path().string());
    EXPECT_NO_THROW(config_from_json_text(text, Mode::kBench, std::nullopt).validate())
        << entry.path();
  }
}

}  // namespace
}  // namespace specverify
