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


#include "graphleak/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "graphleak/hash.hpp"

namespace graphleak {

using json = nlohmann::json;

namespace {

void CheckScored(const std::vector<double>& scores, const std::vector<bool>& positive,
                 const char* what) {
  if (scores.size() != positive.size()) {
    throw DimensionError(std::string(what) + ": score and label counts differ");
  }
  const auto pos = std::count(positive.begin(), positive.end(), true);
  if (pos == 0 || pos == static_cast<long>(positive.size())) {
    throw MetricError(std::string(what) + ": needs at least one positive and one negative");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw MetricError(std::string(what) + ": NaN score");
  }
}

std::vector<bool> Labels(const EdgeProbeSet& probes) {
  std::vector<bool> y;
  y.reserve(probes.pairs.size());
  for (const ProbePair& p : probes.pairs) y.push_back(p.positive);
  return y;
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double PopulationStd(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double Auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  CheckScored(scores, positive, "auc");
  const std::size_t m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double npos = 0.0;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j < m && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += avg;
        npos += 1.0;
      }
    }
    i = j;
  }
  const double nneg = static_cast<double>(m) - npos;
  return (rank_sum - npos * (npos + 1.0) / 2.0) / (npos * nneg);
}

double Auc(const ProbeScores& scores, const EdgeProbeSet& probes) {
  return Auc(scores, Labels(probes));
}

double AveragePrecision(const std::vector<double>& scores,
                        const std::vector<bool>& positive) {
  CheckScored(scores, positive, "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double npos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  double hits = 0.0;
  double ap = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!positive[order[k]]) continue;
    hits += 1.0;
    ap += hits / static_cast<double>(k + 1);
  }
  return ap / npos;
}

double AveragePrecision(const ProbeScores& scores, const EdgeProbeSet& probes) {
  return AveragePrecision(scores, Labels(probes));
}

std::string ToString(ProtocolMode m) {
  return m == ProtocolMode::kRuns10 ? "runs10" : "runs100";
}

ProtocolMode ParseProtocolMode(const std::string& s) {
  if (s == "runs10") return ProtocolMode::kRuns10;
  if (s == "runs100") return ProtocolMode::kRuns100;
  throw ConfigError("unknown protocol mode '" + s + "' (expected runs10 or runs100)");
}

void Summarize(AttackReport& r) {
  if (r.runs.empty()) throw MetricError("attack report has no runs");
  std::vector<double> aucs;
  std::vector<double> aps;
  for (const RunRecord& run : r.runs) {
    aucs.push_back(run.auc);
    aps.push_back(run.ap);
  }
  r.mean_auc = Mean(aucs);
  r.std_auc = PopulationStd(aucs, r.mean_auc);
  r.mean_ap = Mean(aps);
  r.std_ap = PopulationStd(aps, r.mean_ap);
}

std::vector<EdgeProbeSet> MakeProbeSets(const AttributedGraph& g, double node_fraction,
                                        const std::vector<std::uint64_t>& seeds) {
  std::vector<EdgeProbeSet> sets;
  sets.reserve(seeds.size());
  for (std::uint64_t s : seeds) {
    sets.push_back(SampleProbeSet(g, node_fraction, RngStream(s, kProbeStream)));
    sets.back().seed = s;
  }
  return sets;
}

std::string ProbeSetId(const EdgeProbeSet& p) {
  std::string bytes;
  bytes.reserve(p.pairs.size() * 24);
  for (const ProbePair& q : p.pairs) {
    bytes += std::to_string(q.u) + ',' + std::to_string(q.v) + ',' + (q.positive ? '1' : '0') +
             ';';
  }
  return "p" + std::to_string(p.seed) + "-" + ContentHash(bytes).substr(0, 12);
}

AttackReport RunProtocol(const std::string& attack, const AttackFactory& factory,
                         const std::vector<EdgeProbeSet>& probes,
                         const std::vector<std::uint64_t>& seeds, ProtocolMode mode) {
  if (seeds.empty() || seeds.size() != probes.size()) {
    throw ContractError("run_protocol: need one probe set per seed");
  }
  AttackReport r;
  r.attack = attack;
  r.mode = mode;
  std::vector<std::string> ids;
  for (const EdgeProbeSet& p : probes) ids.push_back(ProbeSetId(p));
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const AttackInstance instance = factory(seeds[i]);
    const std::size_t lo = mode == ProtocolMode::kRuns10 ? i : 0;
    const std::size_t hi = mode == ProtocolMode::kRuns10 ? i + 1 : probes.size();
    for (std::size_t k = lo; k < hi; ++k) {
      const ProbeScores s = instance(probes[k]);
      r.runs.push_back({seeds[i], ids[k], Auc(s, probes[k]), AveragePrecision(s, probes[k])});
    }
  }
  Summarize(r);
  return r;
}

json ToJson(const AttackReport& r) {
  json runs = json::array();
  for (const RunRecord& run : r.runs) {
    runs.push_back({{"seed", run.seed},
                    {"probe_set", run.probe_set_id},
                    {"auc", run.auc},
                    {"ap", run.ap}});
  }
  return {{"attack", r.attack},     {"mode", ToString(r.mode)},
          {"runs", runs},           {"mean_auc", r.mean_auc},
          {"std_auc", r.std_auc},   {"mean_ap", r.mean_ap},
          {"std_ap", r.std_ap},     {"config", r.config},
          {"config_hash", r.config_hash}, {"input_hash", r.input_hash}};
}

AttackReport AttackReportFromJson(const json& j) {
  AttackReport r;
  r.attack = j.at("attack").get<std::string>();
  r.mode = ParseProtocolMode(j.at("mode").get<std::string>());
  for (const json& run : j.at("runs")) {
    r.runs.push_back({run.at("seed").get<std::uint64_t>(),
                      run.at("probe_set").get<std::string>(), run.at("auc").get<double>(),
                      run.at("ap").get<double>()});
  }
  r.config = j.value("config", json::object());
  r.config_hash = j.value("config_hash", std::string());
  r.input_hash = j.value("input_hash", std::string());
  Summarize(r);
  return r;
}

void WriteAttackReport(const AttackReport& r, const std::filesystem::path& stem) {
  {
    std::ofstream out(stem.string() + ".json");
    if (!out) throw std::runtime_error("cannot write " + stem.string() + ".json");
    out << ToJson(r).dump(2) << '\n';
  }
  std::ofstream csv(stem.string() + ".csv");
  if (!csv) throw std::runtime_error("cannot write " + stem.string() + ".csv");
  csv.precision(17);
  if (!r.config.empty()) csv << "# config: " << r.config.dump() << '\n';
  csv << "attack,mode,seed,probe_set,auc,ap,config_hash,input_hash\n";
  for (const RunRecord& run : r.runs) {
    csv << r.attack << ',' << ToString(r.mode) << ',' << run.seed << ',' << run.probe_set_id
        << ',' << run.auc << ',' << run.ap << ',' << r.config_hash << ',' << r.input_hash
        << '\n';
  }
}

std::string ToString(AdvantageInput k) {
  return k == AdvantageInput::kExplanations ? "explanations" : "features_plus_explanations";
}

double DownstreamAccuracy(const Matrix& input, const SparseMatrix& adjacency,
                          const AttributedGraph& g, const GcnConfig& gcn) {
  if (input.rows() != g.num_nodes()) {
    throw DimensionError("advantage: input rows differ from node count");
  }
  const SparseMatrix a_hat = NormalizeAdjacency(adjacency);
  const GcnModel m = TrainGcn(input, a_hat, g.labels, g.splits.train, g.num_classes, gcn);
  return Accuracy(Predict(GcnForward(m, input, a_hat)), g.labels, g.splits.test);
}

AdvantageReport AttackerAdvantage(const Matrix& input, AdvantageInput kind,
                                  const ReconScore& recon, const AttributedGraph& g,
                                  const AdvantageConfig& cfg, const ReconScore* slaps) {
  const Index n = g.num_nodes();
  if (recon.edge_scores.rows() != n || recon.edge_scores.cols() != n) {
    throw DimensionError("advantage: reconstruction does not match the graph");
  }
  AdvantageReport r;
  r.input_kind = kind;
  r.adj_source = recon.attack;
  const RngStream sampler(cfg.sample_seed, 0xad5);
  r.accuracy = DownstreamAccuracy(
      input, AdjacencyFromEdges(n, SampleEdges(recon, sampler.Derive(0))), g, cfg.gcn);
  if (slaps != nullptr) {
    r.slaps_acc = DownstreamAccuracy(
        g.features, AdjacencyFromEdges(n, SampleEdges(*slaps, sampler.Derive(1))), g, cfg.gcn);
  }
  if (cfg.compute_max) r.max_acc = DownstreamAccuracy(g.features, g.adjacency, g, cfg.gcn);
  return r;
}

json ToJson(const AdvantageReport& r) {
  json j = {{"input_kind", ToString(r.input_kind)},
            {"adj_source", r.adj_source},
            {"accuracy", r.accuracy}};
  j["slaps_acc"] = r.slaps_acc ? json(*r.slaps_acc) : json(nullptr);
  j["max_acc"] = r.max_acc ? json(*r.max_acc) : json(nullptr);
  return j;
}

}  // namespace graphleak
