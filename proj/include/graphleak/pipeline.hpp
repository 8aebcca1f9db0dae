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

#ifndef GRAPHLEAK_PIPELINE_HPP_
#define GRAPHLEAK_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphleak/attacks.hpp"
#include "graphleak/evaluation.hpp"
#include "graphleak/explain.hpp"
#include "graphleak/gnn.hpp"
#include "graphleak/graph.hpp"
#include "graphleak/metrics.hpp"

namespace graphleak {

enum class DatasetSource { kPlanetoid, kCanonical, kSbm };

struct DatasetConfig {
  DatasetSource source = DatasetSource::kPlanetoid;
  std::filesystem::path path;
  std::uint64_t split_seed = 0;
  // SBM only.
  int blocks = 3;
  Index block_size = 60;
  double p_in = 0.3;
  double p_out = 0.02;
  double feature_signal = 2.0;
  Index num_features = 16;
  std::uint64_t sbm_seed = 0;
};

enum class AttackKind {
  kExplainSim,
  kFeatureSim,
  kLsa,
  kGsl,
};

struct AttackConfig {
  std::string variant = "explain_sim";
  AttackKind kind = AttackKind::kExplainSim;
  GslVariant gsl_variant = GslVariant::kGsef;
  GslConfig gsl;
  // Reference MLP for the posterior attack.
  GcnConfig reference;
  double partial_nodes = 1.0;
  bool black_box_labels = false;
};

struct ProtocolConfig {
  ProtocolMode mode = ProtocolMode::kRuns10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double probe_fraction = 0.1;
};

struct DefenseConfig {
  // Infinity leaves the explanations untouched.
  double epsilon = 1.0;
};

struct FidelityConfig {
  int samples = 100;
  // Number of randomly chosen nodes scored; 0 scores every node.
  Index nodes = 0;
};

struct AdvantageStageConfig {
  AdvantageInput input = AdvantageInput::kExplanations;
  GcnConfig gcn;
  std::uint64_t sample_seed = 0;
  bool max = true;
  bool slaps = false;
};

/// One experiment. Optional stages are skipped when absent.
struct ExperimentConfig {
  DatasetConfig dataset;
  std::uint64_t seed = 0;
  GcnConfig target;
  std::optional<ExplainOptions> explainer;
  std::optional<DefenseConfig> defense;
  AttackConfig attack;
  ProtocolConfig protocol;
  std::optional<FidelityConfig> fidelity;
  std::optional<AdvantageStageConfig> advantage;
};

/// Strict parse: unknown keys and ill-typed values raise ConfigError naming
/// the offending path (e.g. "attack.epochs"). Missing keys take defaults.
ExperimentConfig ParseConfig(const nlohmann::json& j);
/// Fully resolved form; ParseConfig(ToJson(c)) reproduces c.
nlohmann::json ToJson(const ExperimentConfig& c);
/// Throws ConfigError when a requested stage lacks an input it needs.
void CheckDependencies(const ExperimentConfig& c);

nlohmann::json ReadJsonFile(const std::filesystem::path& file);

/// Sets a dotted key ("defense.epsilon", "seed") in a raw config document,
/// creating intermediate objects.
void SetPath(nlohmann::json& doc, const std::string& dotted, const nlohmann::json& value);

enum class Stage { kExplain, kDefend, kAttack, kAdvantage, kAll };

std::string ToString(Stage s);

/// Thrown when a stage runs without the cached output of an earlier one.
class MissingStageError : public ConfigError {
 public:
  MissingStageError(const std::string& needed, const std::string& what)
      : ConfigError("run stage " + needed + " first: " + what), needed_(needed) {}
  const std::string& needed() const { return needed_; }

 private:
  std::string needed_;
};

struct PipelineOptions {
  std::filesystem::path out_dir = "out";
  std::filesystem::path cache_dir;  // empty: <out_dir>/cache
  std::function<void(const std::string&)> log;
};

struct PipelineResult {
  std::optional<AttackReport> attack;
  std::optional<FidelityReport> fidelity;
  std::optional<AdvantageReport> advantage;
  std::vector<std::string> files;
  int cache_hits = 0;
};

/// Content hash of a graph's features, labels, edges and splits.
std::string DatasetHash(const AttributedGraph& g);

AttributedGraph LoadDataset(const DatasetConfig& c);

/// Runs `stage` (kAll: every configured stage in order) and writes its
/// reports under out_dir. Upstream artifacts are looked up in the cache;
/// single stages throw MissingStageError when they are absent.
PipelineResult RunStage(const ExperimentConfig& c, Stage stage,
                        const PipelineOptions& options);

/// Cartesian grid over dotted keys of the raw config.
struct SweepGrid {
  std::vector<std::string> keys;
  std::vector<std::vector<nlohmann::json>> values;

  std::size_t size() const;
  /// Assignment of cell `index`, first key varying slowest.
  std::vector<nlohmann::json> Cell(std::size_t index) const;
};

SweepGrid ParseSweep(const nlohmann::json& sweep);

struct SweepOutcome {
  std::size_t cells = 0;
  std::size_t failed = 0;
  std::filesystem::path merged_csv;
};

/// Runs every grid cell into <out>/cells/<id> (written to a temporary
/// directory and renamed when complete), then writes <out>/sweep.csv and,
/// if any cell failed, <out>/failures.json. `base` is the raw config
/// without its "sweep" key.
SweepOutcome RunSweep(const nlohmann::json& base, const SweepGrid& grid,
                      const PipelineOptions& options, int jobs = 1);

/// Plain-text summary of the reports found under `dir`.
std::string Report(const std::filesystem::path& dir);

}  // namespace graphleak

#endif  // GRAPHLEAK_PIPELINE_HPP_
