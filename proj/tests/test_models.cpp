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

#include <cmath>
#include <set>
#include <vector>

#include "specverify/models.hpp"
#include "specverify/rng.hpp"

namespace specverify {
namespace {

TokenSeq random_prefix(UniformStream& rng, std::size_t vocab,
                       std::size_t max_len) {
  TokenSeq p(static_cast<std::size_t>(rng() * (max_len + 1)));
  for (auto& t : p) t = static_cast<Token>(rng() * vocab);
  return p;
}

ModelPairConfig config(ModelFamily family, double eps) {
  ModelPairConfig c;
  c.vocab_size = 8;
  c.family = family;
  c.seed = 99;
  c.epsilon = eps;
  return c;
}

TEST(MakePair, ZeroDriftGivesIdenticalModels) {
  for (auto fam : {ModelFamily::kSeededRandom, ModelFamily::kMarkov1}) {
    for (double t : {0.3, 1.0, 2.0}) {
      auto c = config(fam, 0.0);
      c.temperature = t;
      const auto [target, draft] = make_pair(c);
      UniformStream rng(5);
      for (int i = 0; i < 50; ++i) {
        const auto p = random_prefix(rng, 8, 4);
        EXPECT_EQ(target.eval(p), draft.eval(p));
      }
    }
  }
}

TEST(MakePair, DeterministicInSeed) {
  const auto c = config(ModelFamily::kSeededRandom, 0.4);
  const auto [t1, d1] = make_pair(c);
  const auto [t2, d2] = make_pair(c);
  UniformStream rng(6);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_prefix(rng, 8, 5);
    EXPECT_EQ(t1.eval(p), t2.eval(p));
    EXPECT_EQ(d1.eval(p), d2.eval(p));
    EXPECT_EQ(d1.eval(p), d1.eval(p));
  }
}

TEST(MakePair, RejectsBadConfig) {
  auto expect_bad = [](ModelPairConfig c) {
    try {
      make_pair(c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kBadConfig);
    }
  };
  auto c = config(ModelFamily::kSeededRandom, 0.5);
  c.vocab_size = 1;
  expect_bad(c);
  c = config(ModelFamily::kSeededRandom, 1.5);
  expect_bad(c);
  c = config(ModelFamily::kSeededRandom, 0.5);
  c.temperature = 0.0;
  expect_bad(c);
  c.temperature = -1.0;
  expect_bad(c);
}

// Pooled Pearson correlation of (target, draft) probabilities at eps = 1 is
// compared to the same statistic for two unrelated targets.
TEST(MakePair, FullDriftDraftIsIndependent) {
  auto correlation = [](const ConditionalModel& a, const ConditionalModel& b) {
    UniformStream rng(13);
    std::vector<double> xs, ys;
    for (int i = 0; i < 100; ++i) {
      const auto p = random_prefix(rng, 8, 3);
      const auto da = a.eval(p), db = b.eval(p);
      for (std::size_t t = 0; t < 8; ++t) {
        xs.push_back(da[static_cast<Token>(t)]);
        ys.push_back(db[static_cast<Token>(t)]);
      }
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= xs.size(), my /= ys.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    return std::pair{sxy / std::sqrt(sxx * syy), xs.size()};
  };
  const auto [target, draft] = make_pair(config(ModelFamily::kSeededRandom, 1));
  auto other_cfg = config(ModelFamily::kSeededRandom, 1);
  other_cfg.seed = 12345;
  const auto [other, unused] = make_pair(other_cfg);
  const auto [r, n] = correlation(target, draft);
  const auto [r0, n0] = correlation(target, other);
  // Two-sample Fisher z test at roughly 99.9% confidence.
  const double z = std::abs(std::atanh(r) - std::atanh(r0)) /
                   std::sqrt(1.0 / (n - 3.0) + 1.0 / (n0 - 3.0));
  EXPECT_LT(z, 3.3) << "r=" << r << " r0=" << r0;
  EXPECT_LT(std::abs(r), 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Eval, MarkovDependsOnLastTokenOnly) {
  const auto [target, draft] = make_pair(config(ModelFamily::kMarkov1, 0.5));
  EXPECT_EQ(target.eval({0, 3}), target.eval({5, 3}));
  EXPECT_EQ(draft.eval({1, 2, 4}), draft.eval({4}));
  EXPECT_NE(target.eval({}), target.eval({3}));
}

TEST(Eval, SeededRandomPrefixesDiffer) {
  const auto [target, draft] =
      make_pair(config(ModelFamily::kSeededRandom, 0.5));
  std::set<std::vector<double>> seen;
  UniformStream rng(21);
  std::set<TokenSeq> prefixes;
  while (prefixes.size() < 10000) prefixes.insert(random_prefix(rng, 8, 7));
  for (const auto& p : prefixes) {
    const auto d = target.eval(p);
    seen.emplace(d.probs().begin(), d.probs().end());
  }
  EXPECT_EQ(seen.size(), prefixes.size());
}

TEST(Eval, ValidDistributionsAndRangeChecks) {
  for (auto fam : {ModelFamily::kSeededRandom, ModelFamily::kMarkov1}) {
    const auto [target, draft] = make_pair(config(fam, 0.3));
    UniformStream rng(8);
    for (int i = 0; i < 100; ++i) {
      const auto p = random_prefix(rng, 8, 6);
      for (const auto& d : {target.eval(p), draft.eval(p)}) {
        double s = 0;
        for (double x : d.probs()) {
          EXPECT_GT(x, 0.0);
          s += x;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
    try {
      target.eval({8});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kTokenOutOfRange);
    }
    EXPECT_THROW(draft.eval({-1}), Error);
  }
}

TEST(Eval, ExactWeightsAgreeWithDoubles) {
  auto c = config(ModelFamily::kSeededRandom, 0.3);
  c.exact_weights = true;
  const auto [target, draft] = make_pair(c);
  EXPECT_TRUE(draft.exact());
  for (const TokenSeq& p : {TokenSeq{}, TokenSeq{2}, TokenSeq{1, 7}}) {
    const auto e = draft.eval_exact(p);
    const auto d = draft.eval(p);
    for (std::size_t t = 0; t < 8; ++t) {
      EXPECT_NEAR(to_double(e[static_cast<Token>(t)]),
                  d[static_cast<Token>(t)], 1e-15);
    }
  }
  const auto [t2, d2] = make_pair(config(ModelFamily::kSeededRandom, 0.3));
  try {
    t2.eval_exact({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kExactModeUnavailable);
  }
}

TEST(Eval, KindNames) {
  const auto [t, d] = make_pair(config(ModelFamily::kMarkov1, 0.3));
  EXPECT_EQ(t.kind_name(), "markov1");
  EXPECT_EQ(d.kind_name(), "mixture-of-target");
  EXPECT_EQ(parse_family("seeded-random"), ModelFamily::kSeededRandom);
  EXPECT_THROW(parse_family("gpt"), Error);
}

TEST(ModelProperties, OverlapShrinksWithDrift) {
  std::vector<double> mean_overlap;
  for (double eps : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto [target, draft] =
        make_pair(config(ModelFamily::kSeededRandom, eps));
    UniformStream rng(31);
    double total = 0;
    for (int i = 0; i < 400; ++i) {
      const auto p = random_prefix(rng, 8, 4);
      total += overlap(target.eval(p), draft.eval(p));
    }
    mean_overlap.push_back(total / 400);
  }
  EXPECT_DOUBLE_EQ(mean_overlap.front(), 1.0);
  for (std::size_t i = 1; i < mean_overlap.size(); ++i) {
    EXPECT_LE(mean_overlap[i], mean_overlap[i - 1]) << i;
  }
}

TEST(PrefixHash, StableGoldenValues) {
  // Pinned so golden files reproduce across platforms.
  EXPECT_EQ(prefix_hash(0, {}), mix64(mix64(0)));
  const Token seq[2] = {1, 2};
  EXPECT_EQ(prefix_hash(7, seq), prefix_hash(7, seq));
  EXPECT_NE(prefix_hash(7, seq), prefix_hash(8, seq));
}

}  // namespace
}  // namespace specverify
