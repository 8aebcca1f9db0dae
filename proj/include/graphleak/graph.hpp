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

#ifndef GRAPHLEAK_GRAPH_HPP_
#define GRAPHLEAK_GRAPH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "graphleak/rng.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

enum class FeatureKind { kBinary, kContinuous };

std::string ToString(FeatureKind kind);
FeatureKind ParseFeatureKind(const std::string& s);

struct Splits {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

/// Undirected attributed graph. The adjacency is kept both as a sorted list
/// of pairs (u < v) and as a symmetric 0/1 sparse matrix with zero diagonal.
struct AttributedGraph {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::pair<Index, Index>> edges;
  SparseMatrix adjacency;
  Splits splits;
  FeatureKind feature_kind = FeatureKind::kContinuous;
  std::string name;

  Index num_nodes() const { return features.rows(); }
  Index num_features() const { return features.cols(); }
  Index num_edges() const { return static_cast<Index>(edges.size()); }
  bool HasEdge(Index u, Index v) const;
  Matrix DenseAdjacency() const;
};

/// Builds a graph from raw parts: edges are symmetrized, deduplicated and
/// stripped of self-loops. Empty splits are replaced by DefaultSplits.
AttributedGraph MakeGraph(Matrix features, std::vector<int> labels,
                          int num_classes,
                          const std::vector<std::pair<Index, Index>>& edges,
                          Splits splits = {}, std::uint64_t split_seed = 0);

/// Throws ValidationError when an invariant of AttributedGraph fails.
void Validate(const AttributedGraph& g);

/// Symmetric sparse 0/1 matrix for an undirected pair list.
SparseMatrix AdjacencyFromEdges(Index n,
                                const std::vector<std::pair<Index, Index>>& e);

/// Per-class 10%/10%/80% partition; each class is shuffled with its own
/// derived stream.
Splits DefaultSplits(const std::vector<int>& labels, int num_classes,
                     std::uint64_t seed, double train_fraction = 0.1,
                     double val_fraction = 0.1);

enum class GraphFormat { kCanonical, kPlanetoidRaw };

/// Canonical: a directory with edges.csv, features.csv, labels.csv and an
/// optional manifest.json. Planetoid raw: <dir>/<name>.content and
/// <dir>/<name>.cites, where name defaults to the directory's base name.
AttributedGraph LoadGraph(const std::filesystem::path& path, GraphFormat format,
                          std::uint64_t split_seed = 0);

/// Writes the canonical layout; LoadGraph(SaveGraph(g)) reproduces g exactly.
void SaveGraph(const AttributedGraph& g, const std::filesystem::path& dir);

struct SbmOptions {
  std::vector<Index> sizes;
  double p_in = 0.5;
  double p_out = 0.05;
  double feature_signal = 1.0;
  Index num_features = 16;
};

/// Stochastic block model. Features are feature_signal times a one-hot block
/// code in the first `blocks` columns plus unit Gaussian noise everywhere.
AttributedGraph SynthSbm(int blocks, const SbmOptions& options, RngStream rng);

struct ProbePair {
  Index u = 0;
  Index v = 0;
  bool positive = false;
};

struct EdgeProbeSet {
  std::vector<ProbePair> pairs;
  std::vector<Index> nodes;
  std::uint64_t seed = 0;

  std::size_t num_positive() const;
  std::size_t num_negative() const;
};

/// Samples round(node_fraction * n) nodes; positives are all incident edges
/// and negatives an equal number of distinct non-edges touching the sample.
EdgeProbeSet SampleProbeSet(const AttributedGraph& g, double node_fraction,
                            RngStream rng);

enum class NoiseMode { kBinaryFlipOnes, kGaussianAdditive };

struct NoiseSpec {
  double ratio = 0.2;
  NoiseMode mode = NoiseMode::kBinaryFlipOnes;
};

struct Corruption {
  Matrix values;
  // Column-major linear indices of the modified entries, ascending.
  std::vector<Index> positions;
};

/// Binary mode zeroes exactly ceil(r * #ones) ones; Gaussian mode adds N(0,1)
/// to exactly ceil(r * #entries) entries.
Corruption CorruptWithPositions(const Matrix& x, const NoiseSpec& spec,
                                RngStream& rng);
Matrix Corrupt(const Matrix& x, const NoiseSpec& spec, RngStream& rng);

/// Number of entries corrupt() changes for `count` eligible entries.
Index CorruptCount(double ratio, Index count);

/// Restriction to round(node_fraction * n) sampled nodes, ids compacted in
/// ascending original order. original_ids, if given, receives the mapping.
AttributedGraph InducedSubgraph(const AttributedGraph& g, double node_fraction,
                                RngStream rng,
                                std::vector<Index>* original_ids = nullptr);

/// Same restriction for an explicit ascending node list.
AttributedGraph RestrictToNodes(const AttributedGraph& g,
                                const std::vector<Index>& nodes);

}  // namespace graphleak

#endif  // GRAPHLEAK_GRAPH_HPP_
