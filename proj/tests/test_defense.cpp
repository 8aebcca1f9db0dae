// Copyright 2026 The graphleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>

#include <gtest/gtest.h>

#include "graphleak/defense.hpp"
#include "graphleak/errors.hpp"

namespace graphleak {
namespace {

ExplanationSet RandomBits(Index rows, Index cols, std::uint64_t seed) {
  ExplanationSet e;
  e.kind = ExplanationKind::kHard;
  e.explainer = ExplainerId::kZorro;
  e.scores.resize(rows, cols);
  RngStream r(seed);
  for (Index i = 0; i < e.scores.size(); ++i) e.scores.data()[i] = r.Bernoulli(0.3) ? 1.0 : 0.0;
  return e;
}

TEST(KeepProbability, KnownValues) {
  EXPECT_NEAR(KeepProbability(std::log(3.0)), 0.75, 1e-15);
  EXPECT_NEAR(KeepProbability(1e-4), 0.500025, 1e-6);
  EXPECT_DOUBLE_EQ(KeepProbability(0.0), 0.5);
  EXPECT_DOUBLE_EQ(KeepProbability(kEpsilonCap), 1.0);
  EXPECT_DOUBLE_EQ(KeepProbability(INFINITY), 1.0);
}

TEST(ReportOneProbability, RatioIsBoundedByExpEpsilon) {
  for (double eps : {1e-4, 0.01, 0.1, 1.0, 5.0}) {
    const double p1 = ReportOneProbability(eps, true);
    const double p0 = ReportOneProbability(eps, false);
    EXPECT_NEAR(p1 / p0, std::exp(eps), 1e-12 * std::exp(eps));
    EXPECT_NEAR((1 - p0) / (1 - p1), std::exp(eps), 1e-12 * std::exp(eps));
  }
}

class FlipFrequency : public ::testing::TestWithParam<double> {};

TEST_P(FlipFrequency, WithinThreeSigma) {
  const double eps = GetParam();
  const ExplanationSet e = RandomBits(1000, 1000, 7);
  const ExplanationSet out = PerturbHard(e, eps, RngStream(8));
  double kept = 0;
  for (Index i = 0; i < e.scores.size(); ++i) kept += e.scores.data()[i] == out.scores.data()[i];
  const double n = static_cast<double>(e.scores.size());
  const double p = KeepProbability(eps);
  EXPECT_NEAR(kept / n, p, 3 * std::sqrt(p * (1 - p) / n));
  EXPECT_NO_THROW(Validate(out));
}

INSTANTIATE_TEST_SUITE_P(Budgets, FlipFrequency, ::testing::Values(1e-4, 0.1, 1.0));

TEST(PerturbHard, DeterministicPerRow) {
  const ExplanationSet e = RandomBits(20, 30, 1);
  const ExplanationSet a = PerturbHard(e, 0.5, RngStream(2));
  EXPECT_EQ(a.scores, PerturbHard(e, 0.5, RngStream(2)).scores);
  EXPECT_NE(a.scores, PerturbHard(e, 0.5, RngStream(3)).scores);
  // Row i depends only on row i's stream.
  ExplanationSet top = e;
  top.scores = e.scores.topRows(5);
  EXPECT_EQ(PerturbHard(top, 0.5, RngStream(2)).scores, a.scores.topRows(5));
  EXPECT_EQ(PerturbHard(e, INFINITY, RngStream(2)).scores, e.scores);
}

TEST(PerturbHard, RejectsSoftInput) {
  ExplanationSet e;
  e.scores = Matrix::Zero(2, 2);
  EXPECT_THROW(PerturbHard(e, 1.0, RngStream(1)), ContractError);
  ExplanationSet h = RandomBits(2, 2, 1);
  EXPECT_THROW(PerturbSoft(h, 1.0, RngStream(1)), ContractError);
}

TEST(PerturbSoft, ReplacementFractionAndMoments) {
  ExplanationSet e;
  e.kind = ExplanationKind::kSoft;
  e.scores = Matrix::Constant(500, 400, 7.5);
  const double eps = 0.5;
  const ExplanationSet out = PerturbSoft(e, eps, RngStream(4));
  double replaced = 0;
  double sum = 0;
  double sq = 0;
  for (Index i = 0; i < out.scores.size(); ++i) {
    const double v = out.scores.data()[i];
    if (v == 7.5) continue;
    ++replaced;
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(out.scores.size());
  const double q = 1 - KeepProbability(eps);
  EXPECT_NEAR(replaced / n, q, 3 * std::sqrt(q * (1 - q) / n));
  EXPECT_NEAR(sum / replaced, 0.0, 3 / std::sqrt(replaced));
  EXPECT_NEAR(sq / replaced, 1.0, 3 * std::sqrt(2 / replaced));
}

TEST(LdpAccount, KnownValues) {
  EXPECT_NEAR(LdpAccount(1e-4, 1433), 0.1433, 1e-12);
  EXPECT_DOUBLE_EQ(LdpAccount(0.7, 1), 0.7);
  EXPECT_DOUBLE_EQ(LdpAccount(1.0, 10), 10.0);
  EXPECT_DOUBLE_EQ(PrivacyBudget(0.5, 4).total(), 2.0);
}

}  // namespace
}  // namespace graphleak
