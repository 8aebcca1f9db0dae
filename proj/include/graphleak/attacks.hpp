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


#ifndef GRAPHLEAK_ATTACKS_HPP_
#define GRAPHLEAK_ATTACKS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "graphleak/explain.hpp"
#include "graphleak/gnn.hpp"
#include "graphleak/graph.hpp"
#include "graphleak/ops.hpp"
#include "graphleak/rng.hpp"
#include "graphleak/tape.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

/// One score per probe pair, in probe order.
using ProbeScores = std::vector<double>;

/// Pairwise cosine similarity of the rows. Rows with zero norm score 0
/// against everything, including themselves. The result is exactly
/// symmetric and agrees bit for bit with CosineScores.
Matrix CosineSimilarity(const Matrix& rows);
ProbeScores CosineScores(const Matrix& rows, const EdgeProbeSet& probes);

ProbeScores ExplainSim(const ExplanationSet& e, const EdgeProbeSet& probes);
ProbeScores FeatureSim(const AttributedGraph& g, const EdgeProbeSet& probes);

/// Posterior similarity under the target GCN minus the similarity under a
/// graph-free reference MLP, mapped from [-1, 1] to [0, 1].
ProbeScores LsaPosterior(const GcnModel& target, const MlpModel& reference,
                         const AttributedGraph& g, const EdgeProbeSet& probes);

enum class GeneratorSource { kFeatures, kExplanations, kConcat, kMult };

/// Full-parameter generator: every adjacency cell is its own parameter.
template <typename S>
struct GeneratorState {
  Tensor<S> theta;
  GeneratorSource source = GeneratorSource::kFeatures;
};

template <typename S>
GeneratorState<S> InitGenerator(const Matrix& rows, GeneratorSource source) {
  return {Tensor<S>(CosineSimilarity(rows).template cast<S>(), true), source};
}

/// (P(theta) + P(theta)^T) / 2 with P the projection onto [0, 1].
template <typename S>
ad::Var<S> GeneratorAdjacency(ad::Tape<S>& tape, GeneratorState<S>& state) {
  return ad::Symmetrize(ad::Clamp01(tape.Leaf(state.theta)));
}

/// Degree-normalized generator output.
template <typename S>
ad::Var<S> GeneratorForward(ad::Tape<S>& tape, GeneratorState<S>& state) {
  return ad::DegreeNormalize(GeneratorAdjacency(tape, state));
}

/// Value-only generator pass.
Matrix GeneratorForward(const Matrix& theta);

struct ReconScore {
  // Symmetric, entries in [0, 1], zero diagonal.
  Matrix edge_scores;
  std::string attack;
  std::string config_hash;
};

/// clamp01(a1 + a2) with the diagonal zeroed.
ReconScore CombineGenerators(const Matrix& a1, const Matrix& a2);

enum class DaeKind { kBinary, kContinuous };

/// Denoising loss over the listed entries (column-major linear indices).
/// Binary: mean BCE with `decoded` read as logits. Continuous: mean
/// squared error.
double DaeLoss(const Matrix& decoded, const Matrix& original, DaeKind kind,
               const std::vector<Index>& positions);

/// k x 1 decoded entries against their k x 1 targets.
template <typename S>
ad::Var<S> DaeLoss(ad::Var<S> decoded, const Mat<S>& targets, DaeKind kind) {
  return kind == DaeKind::kBinary ? ad::BceWithLogits(decoded, targets)
                                  : ad::Mse(decoded, targets);
}

struct LossBreakdown {
  double l_dae_features = 0.0;
  double l_dae_explanations = 0.0;
  double l_classification = 0.0;
  double total = 0.0;
};

enum class GslVariant { kGsef, kGsefConcat, kGsefMult, kGse, kSlaps };

std::string ToString(GslVariant v);
GslVariant ParseGslVariant(const std::string& s);

struct GslConfig {
  int epochs = 2000;
  double lr = 0.01;
  Index hidden = 512;
  double dropout = 0.5;
  double noise_ratio = 0.2;
  // Random zero entries scored per corrupted one in binary inputs.
  int negative_ratio = 5;
  double classifier_lr = 0.001;
  Index classifier_hidden = 32;
  double classifier_dropout = 0.5;
  // Leading share of epochs trained on the denoising losses alone.
  double warmup_fraction = 0.5;
  // Weight of the explanation branch in GSEF; 0 drops the branch.
  double explanation_weight = 1.0;
  bool single_precision = false;
};

nlohmann::json ToJson(const GslConfig& c);

/// What the attacker holds. Pointers may be null for inputs a variant does
/// not need.
struct GslInputs {
  const Matrix* features = nullptr;
  const Matrix* explanations = nullptr;
  const std::vector<int>* labels = nullptr;
  std::vector<Index> train;
  int num_classes = 0;
};

struct GslResult {
  ReconScore recon;
  std::vector<LossBreakdown> history;
};

/// Graph-structure-learning attack. Throws ConfigError for missing inputs
/// and TrainingError on a non-finite loss.
GslResult RunGslAttack(GslVariant variant, const GslInputs& inputs,
                       const GslConfig& config, RngStream rng);

ProbeScores ScoreProbes(const ReconScore& recon, const EdgeProbeSet& probes);

/// Independent Bernoulli draw per unordered pair; symmetric 0/1 result.
Matrix SampleGraph(const ReconScore& recon, RngStream rng);
std::vector<std::pair<Index, Index>> SampleEdges(const ReconScore& recon,
                                                 RngStream rng);

/// CSV u,v,label,score per probe pair.
void WriteProbeScoresCsv(const EdgeProbeSet& probes, const ProbeScores& scores,
                         const std::filesystem::path& file);

/// Binary matrix export: "GLRS" magic, u64 n, then n*n little-endian f64 in
/// row-major order.
void WriteReconBinary(const ReconScore& recon, const std::filesystem::path& file);
Matrix ReadReconBinary(const std::filesystem::path& file);

}  // namespace graphleak

#endif  // GRAPHLEAK_ATTACKS_HPP_
