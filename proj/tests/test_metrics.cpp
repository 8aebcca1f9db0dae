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
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "graphleak/errors.hpp"
#include "graphleak/gnn.hpp"
#include "graphleak/metrics.hpp"
#include "test_util.hpp"

namespace graphleak {
namespace {

Vector Row(std::initializer_list<double> v) {
  Vector r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

TEST(SparsityEntropy, KnownValues) {
  EXPECT_NEAR(SparsityEntropy(Row({1, 1, 2})), 1.5 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(SparsityEntropy(Row({1, 1, 2})), 1.0397, 1e-4);
  EXPECT_NEAR(SparsityEntropy(Row({3, 3, 3, 3})), std::log(4.0), 1e-12);
  EXPECT_EQ(SparsityEntropy(Row({0, 0, 5, 0})), 0.0);
  // Magnitudes, so signs do not matter.
  EXPECT_NEAR(SparsityEntropy(Row({-1, 1})), std::numbers::ln2, 1e-12);
  EXPECT_THROW(SparsityEntropy(Row({0, 0})), MetricError);
}

TEST(MeanSparsity, SkipsEmptyRows) {
  Matrix s(3, 2);
  s << 1, 1,
       0, 0,
       0, 2;
  Index zero = 0;
  EXPECT_NEAR(MeanSparsity(s, &zero), std::numbers::ln2 / 2, 1e-12);
  EXPECT_EQ(zero, 1);
  EXPECT_THROW(MeanSparsity(Matrix::Zero(2, 2)), MetricError);
}

TEST(IntersectionPct, KnownValues) {
  Matrix a(2, 3);
  a << 1, 0, 1,
       0, 1, 1;
  EXPECT_DOUBLE_EQ(IntersectionPct(a, a), 100.0);
  EXPECT_DOUBLE_EQ(IntersectionPct(a, Matrix::Ones(2, 3) - a), 0.0);
  Matrix half = a;
  half(0, 0) = 0;
  half(1, 2) = 0;
  EXPECT_DOUBLE_EQ(IntersectionPct(a, half), 50.0);

  RngStream r(1);
  const Matrix ones = Matrix::Ones(300, 300);
  Matrix kept(300, 300);
  const double q = 0.3;
  for (Index i = 0; i < kept.size(); ++i) kept.data()[i] = r.Bernoulli(q) ? 1.0 : 0.0;
  EXPECT_NEAR(IntersectionPct(ones, kept), 100 * q, 100 * 3 * std::sqrt(q * (1 - q) / 90000));
}

TEST(FidelityMask, ClampsSoftScores) {
  ExplanationSet e;
  e.kind = ExplanationKind::kSoft;
  e.scores = Matrix(1, 3);
  e.scores << -0.5, 0.25, 3.0;
  EXPECT_EQ(FidelityMask(e, 0), Row({0.0, 0.25, 1.0}));
}

TEST(DatasetFidelity, FullHardMasksScoreOne) {
  const AttributedGraph g = SynthSbm(2, {.sizes = {10, 10}, .num_features = 4}, RngStream(2));
  const GcnModel m = TrainTarget(g, {.hidden = 8, .epochs = 50});
  const ExplainContext ctx(m, g);
  ExplanationSet e;
  e.kind = ExplanationKind::kHard;
  e.explainer = ExplainerId::kZorro;
  e.scores = Matrix::Ones(20, 4);
  const FidelityReport r = DatasetFidelity(ctx, e, 20, RngStream(3));
  EXPECT_DOUBLE_EQ(r.mean_fidelity, 1.0);
  EXPECT_NEAR(r.sparsity, std::log(4.0), 1e-12);
  EXPECT_EQ(r.per_node_fidelity.size(), 20);
  const FidelityReport sub = DatasetFidelity(ctx, e, 20, RngStream(3), {2, 7});
  EXPECT_EQ(sub.per_node_fidelity.size(), 2);
}

TEST(WriteQualityCsv, EmptyIntersectionField) {
  const auto file = testutil::TempDir("quality") / "q.csv";
  WriteQualityCsv({{"zorro", "cora", 0.9, 1.5, -1.0}}, file, "run 1");
  std::ifstream in(file);
  std::string comment, header, row;
  std::getline(in, comment);
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(comment, "# run 1");
  EXPECT_EQ(header, "explainer,dataset,fidelity,sparsity,intersection");
  EXPECT_EQ(row.back(), ',');
}

}  // namespace
}  // namespace graphleak
