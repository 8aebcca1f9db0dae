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


#ifndef GRAPHLEAK_EVALUATION_HPP_
#define GRAPHLEAK_EVALUATION_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphleak/attacks.hpp"
#include "graphleak/gnn.hpp"
#include "graphleak/graph.hpp"

namespace graphleak {

/// Mann-Whitney AUC with average ranks for ties. Throws MetricError unless
/// both classes are present.
double Auc(const std::vector<double>& scores, const std::vector<bool>& positive);
double Auc(const ProbeScores& scores, const EdgeProbeSet& probes);

/// Sum of precision@k times the recall gained at k over the ranking by
/// descending score. Equal scores keep their input order.
double AveragePrecision(const std::vector<double>& scores,
                        const std::vector<bool>& positive);
double AveragePrecision(const ProbeScores& scores, const EdgeProbeSet& probes);

enum class ProtocolMode { kRuns10, kRuns100 };

std::string ToString(ProtocolMode m);
ProtocolMode ParseProtocolMode(const std::string& s);

struct RunRecord {
  std::uint64_t seed = 0;
  std::string probe_set_id;
  double auc = 0.0;
  double ap = 0.0;
};

struct AttackReport {
  std::string attack;
  ProtocolMode mode = ProtocolMode::kRuns10;
  std::vector<RunRecord> runs;
  double mean_auc = 0.0;
  double std_auc = 0.0;
  double mean_ap = 0.0;
  double std_ap = 0.0;
  nlohmann::json config = nlohmann::json::object();
  std::string config_hash;
  std::string input_hash;
};

/// Recomputes the aggregate fields from the runs (population std).
void Summarize(AttackReport& r);

/// Probe set i is sampled from RngStream(seeds[i], kProbeStream).
inline constexpr std::uint64_t kProbeStream = 0x9b0;
std::vector<EdgeProbeSet> MakeProbeSets(const AttributedGraph& g, double node_fraction,
                                        const std::vector<std::uint64_t>& seeds);

/// Stable identifier of a probe set's contents.
std::string ProbeSetId(const EdgeProbeSet& p);

/// An attack instantiated with one seed, scoring arbitrary probe sets.
using AttackInstance = std::function<ProbeScores(const EdgeProbeSet&)>;
using AttackFactory = std::function<AttackInstance(std::uint64_t seed)>;

/// runs10 pairs instance i with probe set i; runs100 scores every instance
/// on every probe set. seeds and probe sets must have equal length.
AttackReport RunProtocol(const std::string& attack, const AttackFactory& factory,
                         const std::vector<EdgeProbeSet>& probes,
                         const std::vector<std::uint64_t>& seeds, ProtocolMode mode);

nlohmann::json ToJson(const AttackReport& r);
AttackReport AttackReportFromJson(const nlohmann::json& j);
/// Writes <stem>.json and <stem>.csv (one row per run). The CSV starts with
/// a "# config: " comment line when the report carries a config.
void WriteAttackReport(const AttackReport& r, const std::filesystem::path& stem);

enum class AdvantageInput { kExplanations, kFeaturesPlusExplanations };

std::string ToString(AdvantageInput k);

struct AdvantageReport {
  AdvantageInput input_kind = AdvantageInput::kExplanations;
  std::string adj_source;
  double accuracy = 0.0;
  std::optional<double> slaps_acc;
  std::optional<double> max_acc;
};

struct AdvantageConfig {
  GcnConfig gcn;
  std::uint64_t sample_seed = 0;
  bool compute_max = true;
};

/// Test accuracy of a fresh GCN trained on (input, adjacency).
double DownstreamAccuracy(const Matrix& input, const SparseMatrix& adjacency,
                          const AttributedGraph& g, const GcnConfig& gcn);

/// Trains a GCN on `input` over a Bernoulli sample of `recon` and reports
/// its test accuracy. max_acc uses the true features and graph with the
/// same GCN configuration; slaps_acc uses a sample of `slaps` when given.
AdvantageReport AttackerAdvantage(const Matrix& input, AdvantageInput kind,
                                  const ReconScore& recon, const AttributedGraph& g,
                                  const AdvantageConfig& cfg,
                                  const ReconScore* slaps = nullptr);

nlohmann::json ToJson(const AdvantageReport& r);

}  // namespace graphleak

#endif  // GRAPHLEAK_EVALUATION_HPP_
