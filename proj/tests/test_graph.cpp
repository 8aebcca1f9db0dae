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


#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "graphleak/errors.hpp"
#include "graphleak/graph.hpp"
#include "test_util.hpp"

namespace graphleak {
namespace {

namespace fs = std::filesystem;

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TEST(LoadGraph, CanonicalTriple) {
  const fs::path dir = testutil::TempDir("canonical");
  WriteFile(dir / "edges.csv", "0,1\n1,0\n");
  WriteFile(dir / "features.csv", "1,0\n0,1\n");
  WriteFile(dir / "labels.csv", "0\n1\n");
  const AttributedGraph g = LoadGraph(dir, GraphFormat::kCanonical);
  EXPECT_EQ(g.num_nodes(), 2);
  EXPECT_EQ(g.num_edges(), 1);
  EXPECT_EQ(g.adjacency.coeff(0, 1), 1.0);
  EXPECT_EQ(g.adjacency.coeff(1, 0), 1.0);
  EXPECT_EQ(g.feature_kind, FeatureKind::kBinary);
}

TEST(LoadGraph, MalformedFieldNamesLine) {
  const fs::path dir = testutil::TempDir("malformed");
  WriteFile(dir / "edges.csv", "0,1\n1,x\n");
  WriteFile(dir / "features.csv", "1,0\n0,1\n");
  WriteFile(dir / "labels.csv", "0\n1\n");
  try {
    LoadGraph(dir, GraphFormat::kCanonical);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("edges.csv"), std::string::npos);
  }
}

TEST(LoadGraph, Cora) {
  const AttributedGraph& g = testutil::Cora();
  EXPECT_EQ(g.num_nodes(), 2708);
  EXPECT_EQ(g.num_features(), 1433);
  EXPECT_EQ(g.num_classes, 7);
  // Distinct undirected pairs after dropping duplicate and reversed citations.
  EXPECT_EQ(g.num_edges(), 5278);
  EXPECT_EQ(g.feature_kind, FeatureKind::kBinary);
  EXPECT_NO_THROW(Validate(g));
}

TEST(SaveGraph, RoundTripIsExact) {
  const AttributedGraph g = SynthSbm(2, {.sizes = {8, 8}, .num_features = 5}, RngStream(3));
  const fs::path dir = testutil::TempDir("roundtrip");
  SaveGraph(g, dir);
  const AttributedGraph h = LoadGraph(dir, GraphFormat::kCanonical);
  EXPECT_EQ(h.features, g.features);
  EXPECT_EQ(h.labels, g.labels);
  EXPECT_EQ(h.edges, g.edges);
  EXPECT_EQ(h.splits.train, g.splits.train);
  EXPECT_EQ(h.splits.test, g.splits.test);
  const fs::path again = testutil::TempDir("roundtrip2");
  SaveGraph(h, again);
  for (const char* f : {"edges.csv", "features.csv", "labels.csv", "manifest.json"}) {
    std::ifstream a(dir / f), b(again / f);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb) << f;
  }
}

TEST(MakeGraph, DeduplicatesAndDropsSelfLoops) {
  const AttributedGraph g =
      MakeGraph(Matrix::Identity(3, 3), {0, 1, 0}, 2, {{0, 1}, {1, 0}, {2, 2}, {1, 2}});
  EXPECT_EQ(g.num_edges(), 2);
  EXPECT_EQ(g.adjacency.coeff(2, 2), 0.0);
}

TEST(DefaultSplits, PerClassFractions) {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) labels.insert(labels.end(), 100, c);
  const Splits s = DefaultSplits(labels, 3, 5);
  EXPECT_EQ(s.train.size(), 30u);
  EXPECT_EQ(s.val.size(), 30u);
  EXPECT_EQ(s.test.size(), 240u);
  std::set<Index> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 300u);
}

TEST(SynthSbm, DegenerateProbabilitiesGiveCompleteBlocks) {
  const AttributedGraph g =
      SynthSbm(2, {.sizes = {3, 3}, .p_in = 1.0, .p_out = 0.0, .num_features = 4}, RngStream(1));
  EXPECT_EQ(g.num_nodes(), 6);
  EXPECT_EQ(g.num_edges(), 6);
  for (const auto& [u, v] : g.edges) EXPECT_EQ(g.labels[u], g.labels[v]);
}

TEST(SynthSbm, IntraBlockEdgesDominate) {
  const AttributedGraph g =
      SynthSbm(2, {.sizes = {50, 50}, .p_in = 0.5, .p_out = 0.05, .num_features = 4},
               RngStream(2));
  Index intra = 0;
  for (const auto& [u, v] : g.edges) intra += g.labels[u] == g.labels[v];
  // Expected 2 * 0.5 * C(50, 2) = 1225 intra and 0.05 * 2500 = 125 inter.
  EXPECT_NEAR(static_cast<double>(intra), 1225.0, 5 * std::sqrt(1225.0 * 0.5));
  EXPECT_NEAR(static_cast<double>(g.num_edges() - intra), 125.0, 5 * std::sqrt(125.0));
}

TEST(SampleProbeSet, CompleteGraphHasNoNegatives) {
  const AttributedGraph k4 = MakeGraph(Matrix::Identity(4, 4), {0, 0, 0, 0}, 1,
                                       {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  EXPECT_THROW(SampleProbeSet(k4, 0.25, RngStream(1)), EmptyProbeError);
}

TEST(SampleProbeSet, PathGraphIsInfeasible) {
  const AttributedGraph path =
      MakeGraph(Matrix::Identity(3, 3), {0, 0, 0}, 1, {{0, 1}, {1, 2}});
  // Whichever node is drawn, there are fewer non-edges than edges to match.
  for (std::uint64_t s = 0; s < 6; ++s) {
    try {
      const EdgeProbeSet p = SampleProbeSet(path, 1.0 / 3.0, RngStream(s));
      EXPECT_EQ(p.num_positive(), p.num_negative());
    } catch (const EmptyProbeError&) {
    }
  }
  EXPECT_THROW(SampleProbeSet(path, 1.0, RngStream(0)), EmptyProbeError);
}

TEST(SampleProbeSet, CoraMatchesIncidenceScan) {
  const AttributedGraph& g = testutil::Cora();
  const EdgeProbeSet p = SampleProbeSet(g, 0.1, RngStream(4, 0x9b0));
  ASSERT_EQ(p.nodes.size(), 271u);
  const std::set<Index> sampled(p.nodes.begin(), p.nodes.end());
  std::size_t incident = 0;
  for (const auto& [u, v] : g.edges) incident += sampled.count(u) || sampled.count(v);
  EXPECT_EQ(p.num_positive(), incident);
  EXPECT_EQ(p.num_negative(), incident);
  std::set<std::pair<Index, Index>> seen;
  for (const ProbePair& q : p.pairs) {
    EXPECT_TRUE(seen.insert({std::min(q.u, q.v), std::max(q.u, q.v)}).second);
    EXPECT_NE(q.u, q.v);
    EXPECT_EQ(g.HasEdge(q.u, q.v), q.positive);
    EXPECT_TRUE(sampled.count(q.u) || sampled.count(q.v));
  }
}

TEST(Corrupt, FlipsExactlyTheRoundedUpShareOfOnes) {
  Matrix x = Matrix::Zero(1, 20);
  for (int j = 0; j < 10; ++j) x(0, 2 * j) = 1.0;
  RngStream r(1);
  const Corruption c = CorruptWithPositions(x, {0.2, NoiseMode::kBinaryFlipOnes}, r);
  EXPECT_EQ(c.positions.size(), 2u);
  EXPECT_EQ(c.values.sum(), 8.0);
  for (Index pos : c.positions) {
    EXPECT_EQ(x.data()[pos], 1.0);
    EXPECT_EQ(c.values.data()[pos], 0.0);
  }
  EXPECT_EQ(CorruptCount(0.25, 10), 3);
}

TEST(Corrupt, DegenerateInputsAreUnchanged) {
  RngStream r(2);
  const Matrix zero = Matrix::Zero(3, 4);
  EXPECT_EQ(Corrupt(zero, {0.5, NoiseMode::kBinaryFlipOnes}, r), zero);
  const Matrix x = Matrix::Random(3, 4);
  EXPECT_EQ(Corrupt(x, {0.0, NoiseMode::kGaussianAdditive}, r), x);
  const Matrix g = Corrupt(x, {0.5, NoiseMode::kGaussianAdditive}, r);
  EXPECT_EQ((g.array() != x.array()).count(), 6);
}

TEST(Corrupt, BinaryModeRejectsNonBinary) {
  RngStream r(3);
  EXPECT_THROW(Corrupt(Matrix::Constant(2, 2, 0.5), {0.2, NoiseMode::kBinaryFlipOnes}, r),
               DomainError);
}

TEST(InducedSubgraph, FullFractionKeepsEverything) {
  const AttributedGraph g = SynthSbm(2, {.sizes = {10, 10}, .num_features = 4}, RngStream(5));
  const AttributedGraph h = InducedSubgraph(g, 1.0, RngStream(1));
  EXPECT_EQ(h.num_nodes(), g.num_nodes());
  EXPECT_EQ(h.edges, g.edges);
}

TEST(InducedSubgraph, TriangleKeepsTheEdgeBetweenSurvivors) {
  const AttributedGraph tri =
      MakeGraph(Matrix::Identity(3, 3), {0, 0, 0}, 1, {{0, 1}, {1, 2}, {0, 2}});
  std::vector<Index> ids;
  const AttributedGraph h = InducedSubgraph(tri, 2.0 / 3.0, RngStream(7), &ids);
  ASSERT_EQ(h.num_nodes(), 2);
  EXPECT_EQ(h.num_edges(), 1);
}

TEST(InducedSubgraph, CoraMatchesEdgeFilter) {
  const AttributedGraph& g = testutil::Cora();
  std::vector<Index> ids;
  const AttributedGraph h = InducedSubgraph(g, 0.3, RngStream(8), &ids);
  EXPECT_EQ(h.num_nodes(), 812);
  const std::set<Index> kept(ids.begin(), ids.end());
  Index expected = 0;
  for (const auto& [u, v] : g.edges) expected += kept.count(u) && kept.count(v);
  EXPECT_EQ(h.num_edges(), expected);
  EXPECT_NO_THROW(Validate(h));
}

}  // namespace
}  // namespace graphleak
