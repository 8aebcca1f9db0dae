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

#include "graphleak/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "graphleak/defense.hpp"
#include "graphleak/errors.hpp"
#include "graphleak/hash.hpp"
#include "graphleak/metrics.hpp"

namespace graphleak {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr std::uint64_t kPartialStream = 0x9a7;
constexpr std::uint64_t kGslStream = 0x651;
constexpr std::uint64_t kDefenseStream = 0xdef;
constexpr std::uint64_t kFidelityStream = 0xf1d;

// Reads one config object, remembering which keys were consumed so that the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Name() + ": expected an object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  const json* Raw(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double Real(const std::string& key, double def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (!v->is_number()) throw ConfigError(Path(key) + ": expected a number");
    return v->get<double>();
  }

  // Numbers or the string "inf".
  double Budget(const std::string& key, double def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (v->is_string() && v->get<std::string>() == "inf") {
      return std::numeric_limits<double>::infinity();
    }
    if (!v->is_number()) throw ConfigError(Path(key) + ": expected a number or \"inf\"");
    return v->get<double>();
  }

  std::int64_t Int(const std::string& key, std::int64_t def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (!v->is_number_integer()) throw ConfigError(Path(key) + ": expected an integer");
    return v->get<std::int64_t>();
  }

  // Signed storage is what json built in code uses for literals like 3.
  static bool IsNonNegativeInteger(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }

  std::uint64_t Unsigned(const std::string& key, std::uint64_t def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (!IsNonNegativeInteger(*v)) {
      throw ConfigError(Path(key) + ": expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  bool Bool(const std::string& key, bool def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (!v->is_boolean()) throw ConfigError(Path(key) + ": expected true or false");
    return v->get<bool>();
  }

  std::string String(const std::string& key, const std::string& def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (!v->is_string()) throw ConfigError(Path(key) + ": expected a string");
    return v->get<std::string>();
  }

  std::vector<std::uint64_t> UnsignedList(const std::string& key,
                                          const std::vector<std::uint64_t>& def) {
    const json* v = Raw(key);
    if (v == nullptr) return def;
    if (!v->is_array()) throw ConfigError(Path(key) + ": expected a list");
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!IsNonNegativeInteger((*v)[i])) {
        throw ConfigError(Path(key) + "[" + std::to_string(i) +
                          "]: expected a non-negative integer");
      }
      out.push_back((*v)[i].get<std::uint64_t>());
    }
    return out;
  }

  // Parses `key` with `parse` and rethrows its errors under this path.
  template <typename T, typename F>
  T Choice(const std::string& key, const std::string& def, F&& parse) {
    const std::string s = String(key, def);
    try {
      return parse(s);
    } catch (const std::exception& e) {
      throw ConfigError(Path(key) + ": " + e.what());
    }
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(Path(it.key()) + ": unknown key");
    }
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string Name() const { return path_.empty() ? "config" : path_; }

  json j_;
  std::string path_;
  std::set<std::string> used_;
};

void Require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path + ": " + what);
}

GcnConfig ParseGcn(Section& s, GcnConfig def) {
  GcnConfig c = def;
  c.hidden = s.Int("hidden", c.hidden);
  c.dropout = s.Real("dropout", c.dropout);
  c.lr = s.Real("lr", c.lr);
  c.weight_decay = s.Real("weight_decay", c.weight_decay);
  c.epochs = static_cast<int>(s.Int("epochs", c.epochs));
  c.seed = s.Unsigned("seed", c.seed);
  Require(c.hidden > 0, s.Path("hidden"), "must be positive");
  Require(c.dropout >= 0.0 && c.dropout < 1.0, s.Path("dropout"), "must lie in [0, 1)");
  Require(c.lr > 0.0, s.Path("lr"), "must be positive");
  Require(c.epochs >= 0, s.Path("epochs"), "must be >= 0");
  return c;
}

json GcnJson(const GcnConfig& c) {
  return {{"hidden", c.hidden}, {"dropout", c.dropout}, {"lr", c.lr},
          {"weight_decay", c.weight_decay}, {"epochs", c.epochs}, {"seed", c.seed}};
}

std::string ToString(DatasetSource s) {
  switch (s) {
    case DatasetSource::kPlanetoid: return "planetoid";
    case DatasetSource::kCanonical: return "canonical";
    case DatasetSource::kSbm: return "sbm";
  }
  return "planetoid";
}

DatasetSource ParseDatasetSource(const std::string& s) {
  if (s == "planetoid") return DatasetSource::kPlanetoid;
  if (s == "canonical") return DatasetSource::kCanonical;
  if (s == "sbm") return DatasetSource::kSbm;
  throw ConfigError("unknown dataset format '" + s + "'");
}

json EpsilonJson(double eps) {
  return std::isinf(eps) ? json("inf") : json(eps);
}

void ParseAttackVariant(AttackConfig& a, const std::string& v) {
  a.variant = v;
  if (v == "explain_sim") {
    a.kind = AttackKind::kExplainSim;
  } else if (v == "feature_sim") {
    a.kind = AttackKind::kFeatureSim;
  } else if (v == "lsa") {
    a.kind = AttackKind::kLsa;
  } else {
    a.kind = AttackKind::kGsl;
    a.gsl_variant = ParseGslVariant(v);
  }
}

bool NeedsExplanations(const AttackConfig& a) {
  if (a.kind == AttackKind::kExplainSim) return true;
  return a.kind == AttackKind::kGsl && a.gsl_variant != GslVariant::kSlaps &&
         !(a.gsl_variant == GslVariant::kGsef && a.gsl.explanation_weight == 0.0);
}

bool NeedsTarget(const ExperimentConfig& c) {
  return c.attack.kind == AttackKind::kLsa || c.attack.black_box_labels;
}

// ---------------------------------------------------------------------------
// Cache.

void EnsureDir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create " + p.string() + ": " + ec.message());
}

fs::path TempSibling(const fs::path& p) {
  std::ostringstream os;
  os << p.string() << ".tmp" << std::this_thread::get_id();
  return os.str();
}

void WriteTextAtomic(const fs::path& file, const std::string& text) {
  const fs::path tmp = TempSibling(file);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, file);
}

void WriteMatrixBinary(const Matrix& m, const fs::path& file) {
  const fs::path tmp = TempSibling(file);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                   static_cast<std::uint64_t>(m.cols())};
    out.write("GLMX", 4);
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, file);
}

Matrix ReadMatrixBinary(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(file.string() + ": cannot open");
  char magic[4];
  std::uint64_t dims[2];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, "GLMX", 4) != 0) {
    throw ParseError(file.string() + ": not a matrix file");
  }
  Matrix m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw ParseError(file.string() + ": truncated");
  return m;
}

class Cache {
 public:
  explicit Cache(fs::path root) : root_(std::move(root)) {}

  static std::string Key(const json& what) { return ContentHash(what.dump()).substr(0, 24); }

  std::optional<GcnModel> LoadModel(const std::string& key) {
    const fs::path f = Dir("models") / (key + ".json");
    if (!fs::exists(f)) return std::nullopt;
    ++hits;
    return LoadCheckpoint(f);
  }

  void StoreModel(const std::string& key, const GcnModel& m) {
    const fs::path f = Dir("models") / (key + ".json");
    WriteTextAtomic(f, ToJson(m).dump() + "\n");
  }

  std::optional<ExplanationSet> LoadExplanations(const std::string& key) {
    const fs::path base = Dir("explanations") / key;
    const fs::path side = base.string() + ".json";
    if (!fs::exists(side)) return std::nullopt;
    const json j = ReadJsonFile(side);
    ExplanationSet e;
    try {
      e.explainer = ParseExplainerId(j.at("explainer_id").get<std::string>());
      e.kind = ParseExplanationKind(j.at("kind").get<std::string>());
      e.seed = j.at("seed").get<std::uint64_t>();
      e.model_hash = j.at("model_checkpoint_hash").get<std::string>();
      e.extra = j.at("extra");
    } catch (const json::exception& ex) {
      throw ParseError(side.string() + ": " + ex.what());
    }
    e.scores = ReadMatrixBinary(base.string() + ".bin");
    ++hits;
    return e;
  }

  void StoreExplanations(const std::string& key, const ExplanationSet& e) {
    const fs::path base = Dir("explanations") / key;
    WriteMatrixBinary(e.scores, base.string() + ".bin");
    // The sidecar goes last: its presence marks a complete entry.
    WriteTextAtomic(base.string() + ".json", Sidecar(e).dump(2) + "\n");
  }

  std::optional<ReconScore> LoadRecon(const std::string& key) {
    const fs::path base = Dir("recon") / key;
    const fs::path side = base.string() + ".json";
    if (!fs::exists(side)) return std::nullopt;
    const json j = ReadJsonFile(side);
    ReconScore r;
    r.attack = j.at("attack").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.edge_scores = ReadReconBinary(base.string() + ".bin");
    ++hits;
    return r;
  }

  void StoreRecon(const std::string& key, const ReconScore& r, const json& history) {
    const fs::path base = Dir("recon") / key;
    const fs::path bin = base.string() + ".bin";
    const fs::path tmp = TempSibling(bin);
    WriteReconBinary(r, tmp);
    fs::rename(tmp, bin);
    WriteTextAtomic(base.string() + ".json",
                    json{{"attack", r.attack}, {"config_hash", r.config_hash},
                         {"history", history}}
                            .dump() +
                        "\n");
  }

  int hits = 0;

 private:
  fs::path Dir(const std::string& kind) {
    const fs::path d = root_ / kind;
    EnsureDir(d);
    return d;
  }

  fs::path root_;
};

// ---------------------------------------------------------------------------
// Stage helpers.

json ExplainerJson(const ExplainOptions& o) {
  return {{"id", ToString(o.explainer)},
          {"seed", o.seed},
          {"zorro_tau", o.zorro.tau},
          {"zorro_samples", o.zorro.samples},
          {"mask_epochs", o.mask.epochs},
          {"mask_lr", o.mask.lr},
          {"mask_reg_size", o.mask.reg_size},
          {"mask_reg_entropy", o.mask.reg_entropy},
          {"mask_init_std", o.mask.init_std},
          {"mask_samples", o.mask.samples},
          {"glime_lambda", o.glime.lambda},
          {"glime_max_nodes", o.glime.max_nodes}};
}

struct Run {
  const ExperimentConfig& cfg;
  const PipelineOptions& opt;
  json resolved;
  Cache cache;
  AttributedGraph g;
  std::string dataset_hash;
  PipelineResult result;

  Run(const ExperimentConfig& c, const PipelineOptions& o)
      : cfg(c),
        opt(o),
        resolved(ToJson(c)),
        cache(o.cache_dir.empty() ? o.out_dir / "cache" : o.cache_dir) {}

  void Log(const std::string& s) const {
    if (opt.log) opt.log(s);
  }

  json Stamp(json body) const {
    body["config"] = resolved;
    body["seeds"] = cfg.protocol.seeds;
    return body;
  }

  void Emit(const std::string& name, const json& body) {
    EnsureDir(opt.out_dir);
    const fs::path f = opt.out_dir / name;
    WriteTextAtomic(f, Stamp(body).dump(2) + "\n");
    result.files.push_back(f.string());
  }

  std::string TargetKey() const {
    return Cache::Key({{"stage", "target"}, {"dataset", dataset_hash},
                       {"params", GcnJson(cfg.target)}});
  }

  std::string ExplainKey() const {
    return Cache::Key({{"stage", "explain"}, {"target", TargetKey()},
                       {"params", ExplainerJson(*cfg.explainer)}});
  }

  std::string DefenseKey() const {
    return Cache::Key({{"stage", "defend"}, {"explain", ExplainKey()},
                       {"epsilon", EpsilonJson(cfg.defense->epsilon)},
                       {"seed", cfg.seed}});
  }

  GcnModel Target(bool may_compute) {
    const std::string key = TargetKey();
    if (auto m = cache.LoadModel(key)) return *m;
    if (!may_compute) throw MissingStageError("explain", "no cached target model " + key);
    Log("training target model");
    GcnModel m = TrainTarget(g, cfg.target);
    cache.StoreModel(key, m);
    return m;
  }

  ExplanationSet Explanations(const GcnModel& target, bool may_compute) {
    const std::string key = ExplainKey();
    if (auto e = cache.LoadExplanations(key)) return *e;
    if (!may_compute) throw MissingStageError("explain", "no cached explanations " + key);
    Log("explaining " + std::to_string(g.num_nodes()) + " nodes with " +
        ToString(cfg.explainer->explainer));
    ExplainContext ctx(target, g);
    const Index n = g.num_nodes();
    const Index step = std::max<Index>(1, n / 10);
    ExplanationSet e = ExplainAll(ctx, *cfg.explainer, {}, [&](Index done, Index total) {
      if (done % step == 0 || done == total) {
        Log("  " + std::to_string(done) + "/" + std::to_string(total));
      }
    });
    cache.StoreExplanations(key, e);
    return e;
  }

  ExplanationSet Defended(const ExplanationSet& clean, bool may_compute) {
    const std::string key = DefenseKey();
    if (auto e = cache.LoadExplanations(key)) return *e;
    if (!may_compute) throw MissingStageError("defend", "no cached perturbed explanations " + key);
    const double eps = cfg.defense->epsilon;
    const RngStream rng(cfg.seed, kDefenseStream);
    ExplanationSet out = clean.kind == ExplanationKind::kHard ? PerturbHard(clean, eps, rng)
                                                              : PerturbSoft(clean, eps, rng);
    cache.StoreExplanations(key, out);
    return out;
  }

  void Quality(const GcnModel& target, const ExplanationSet& released,
               const ExplanationSet* clean) {
    const FidelityConfig& fc = *cfg.fidelity;
    std::vector<Index> nodes;
    if (fc.nodes > 0 && fc.nodes < g.num_nodes()) {
      std::vector<Index> all(static_cast<std::size_t>(g.num_nodes()));
      for (Index i = 0; i < g.num_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
      RngStream r(cfg.seed, kFidelityStream);
      r.Shuffle(all.begin(), all.end());
      nodes.assign(all.begin(), all.begin() + fc.nodes);
      std::sort(nodes.begin(), nodes.end());
    }
    Log("scoring explanation fidelity");
    ExplainContext ctx(target, g);
    FidelityReport fr = DatasetFidelity(ctx, released, fc.samples,
                                        RngStream(cfg.seed, kFidelityStream).Derive(1), nodes);
    QualityRow row{ToString(released.explainer), g.name, fr.mean_fidelity, fr.sparsity, -1.0};
    if (clean != nullptr && released.kind == ExplanationKind::kHard &&
        clean->scores.sum() > 0.0) {
      row.intersection = IntersectionPct(clean->scores, released.scores);
    }
    json body = {{"explainer", row.explainer},
                 {"dataset", row.dataset},
                 {"mean_fidelity", fr.mean_fidelity},
                 {"sparsity", fr.sparsity},
                 {"zero_rows", fr.zero_rows},
                 {"nodes_scored", fr.per_node_fidelity.size()}};
    body["intersection"] = row.intersection >= 0.0 ? json(row.intersection) : json(nullptr);
    Emit("fidelity_report.json", body);
    EnsureDir(opt.out_dir);
    const fs::path q = opt.out_dir / "quality.csv";
    WriteQualityCsv({row}, q, "config: " + resolved.dump());
    result.files.push_back(q.string());
    result.fidelity = std::move(fr);
  }

  // The attacker's slice of the world.
  struct View {
    AttributedGraph g;
    std::vector<Index> ids;
    Matrix explanations;
    bool has_explanations = false;
    std::vector<int> gsl_labels;
  };

  View AttackerView(const std::optional<GcnModel>& target, const ExplanationSet* released) {
    View v;
    if (cfg.attack.partial_nodes < 1.0) {
      v.g = InducedSubgraph(g, cfg.attack.partial_nodes, RngStream(cfg.seed, kPartialStream),
                            &v.ids);
    } else {
      v.g = g;
      v.ids.resize(static_cast<std::size_t>(g.num_nodes()));
      for (Index i = 0; i < g.num_nodes(); ++i) v.ids[static_cast<std::size_t>(i)] = i;
    }
    if (released != nullptr) {
      v.has_explanations = true;
      v.explanations.resize(static_cast<Index>(v.ids.size()), released->scores.cols());
      for (std::size_t k = 0; k < v.ids.size(); ++k) {
        v.explanations.row(static_cast<Index>(k)) = released->scores.row(v.ids[k]);
      }
    }
    if (cfg.attack.black_box_labels) {
      const std::vector<int> bb = BlackBoxLabels(*target, g);
      v.gsl_labels.resize(v.ids.size());
      for (std::size_t k = 0; k < v.ids.size(); ++k) v.gsl_labels[k] = bb[static_cast<std::size_t>(v.ids[k])];
    } else {
      v.gsl_labels = v.g.labels;
    }
    return v;
  }

  std::string GslKey(const std::string& input_hash, GslVariant variant, std::uint64_t seed) const {
    return Cache::Key({{"stage", "attack"},
                       {"inputs", input_hash},
                       {"variant", ToString(variant)},
                       {"params", ToJson(cfg.attack.gsl)},
                       {"partial_nodes", cfg.attack.partial_nodes},
                       {"black_box_labels", cfg.attack.black_box_labels},
                       {"seed", seed}});
  }

  ReconScore Gsl(const View& v, const std::string& input_hash, GslVariant variant,
                 std::uint64_t seed, bool may_compute) {
    const std::string key = GslKey(input_hash, variant, seed);
    if (auto r = cache.LoadRecon(key)) return *r;
    if (!may_compute) throw MissingStageError("attack", "no cached reconstruction " + key);
    Log("structure learning: " + ToString(variant) + " seed " + std::to_string(seed));
    GslInputs in;
    in.features = &v.g.features;
    in.explanations = v.has_explanations ? &v.explanations : nullptr;
    in.labels = &v.gsl_labels;
    in.train = v.g.splits.train;
    in.num_classes = v.g.num_classes;
    GslResult res = RunGslAttack(variant, in, cfg.attack.gsl, RngStream(seed, kGslStream));
    json hist = json::array();
    for (const LossBreakdown& l : res.history) {
      hist.push_back({l.l_dae_features, l.l_dae_explanations, l.l_classification});
    }
    cache.StoreRecon(key, res.recon, hist);
    return res.recon;
  }

  std::string InputHash(const View& v) const {
    std::string s = dataset_hash;
    s += ContentHash(json(v.ids).dump());
    if (v.has_explanations) s += MatrixHash(v.explanations);
    if (cfg.attack.black_box_labels) s += ContentHash(json(v.gsl_labels).dump());
    return ContentHash(s);
  }

  void Attack(const std::optional<GcnModel>& target, const ExplanationSet* released) {
    View v = AttackerView(target, released);
    const std::string input_hash = InputHash(v);
    const std::vector<EdgeProbeSet> probes =
        MakeProbeSets(v.g, cfg.protocol.probe_fraction, cfg.protocol.seeds);
    AttackFactory factory;
    std::optional<MlpModel> reference;
    const AttackConfig& a = cfg.attack;
    switch (a.kind) {
      case AttackKind::kExplainSim: {
        ExplanationSet e;
        e.scores = v.explanations;
        factory = [e](std::uint64_t) {
          return [e](const EdgeProbeSet& p) { return ExplainSim(e, p); };
        };
        break;
      }
      case AttackKind::kFeatureSim:
        factory = [&v](std::uint64_t) {
          return [&v](const EdgeProbeSet& p) { return FeatureSim(v.g, p); };
        };
        break;
      case AttackKind::kLsa: {
        reference = TrainMlp(v.g.features, v.gsl_labels, v.g.splits.train, v.g.num_classes,
                             a.reference);
        factory = [&, target](std::uint64_t) {
          return [&, target](const EdgeProbeSet& p) {
            // The target answers over the full private graph.
            EdgeProbeSet mapped = p;
            for (ProbePair& q : mapped.pairs) {
              q.u = v.ids[static_cast<std::size_t>(q.u)];
              q.v = v.ids[static_cast<std::size_t>(q.v)];
            }
            return LsaPosterior(*target, *reference, g, mapped);
          };
        };
        break;
      }
      case AttackKind::kGsl:
        factory = [&, input_hash](std::uint64_t seed) {
          const ReconScore r = Gsl(v, input_hash, a.gsl_variant, seed, true);
          return [r](const EdgeProbeSet& p) { return ScoreProbes(r, p); };
        };
        break;
    }
    Log("attack " + a.variant + " (" + ToString(cfg.protocol.mode) + ")");
    AttackReport rep = RunProtocol(a.variant, factory, probes, cfg.protocol.seeds,
                                   cfg.protocol.mode);
    rep.config = Stamp(json::object());
    rep.config_hash = ContentHash(resolved.dump());
    rep.input_hash = input_hash;
    EnsureDir(opt.out_dir);
    WriteAttackReport(rep, opt.out_dir / "attack_report");
    result.files.push_back((opt.out_dir / "attack_report.json").string());
    result.files.push_back((opt.out_dir / "attack_report.csv").string());
    result.attack = std::move(rep);
  }

  void Advantage(const std::optional<GcnModel>& target, const ExplanationSet* released,
                 bool may_compute) {
    const AdvantageStageConfig& ac = *cfg.advantage;
    View v = AttackerView(target, released);
    const std::string input_hash = InputHash(v);
    const std::uint64_t seed = cfg.protocol.seeds.front();
    const ReconScore recon = Gsl(v, input_hash, cfg.attack.gsl_variant, seed, may_compute);
    std::optional<ReconScore> slaps;
    if (ac.slaps) slaps = Gsl(v, input_hash, GslVariant::kSlaps, seed, true);
    Matrix input;
    if (ac.input == AdvantageInput::kExplanations) {
      input = v.explanations;
    } else {
      input.resize(v.g.num_nodes(), v.g.num_features() + v.explanations.cols());
      input << v.g.features, v.explanations;
    }
    AdvantageConfig adv{ac.gcn, ac.sample_seed, ac.max};
    Log("downstream training on the reconstructed graph");
    AdvantageReport rep =
        AttackerAdvantage(input, ac.input, recon, v.g, adv, slaps ? &*slaps : nullptr);
    Emit("advantage_report.json", ToJson(rep));
    result.advantage = std::move(rep);
  }
};

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig ParseConfig(const json& j) {
  Section top(j, "");
  if (top.Has("sweep")) throw ConfigError("sweep: only accepted by the sweep command");
  ExperimentConfig c;
  c.seed = top.Unsigned("seed", 0);

  Section ds(top.Raw("dataset") ? *top.Raw("dataset") : json::object(), "dataset");
  c.dataset.source = ds.Choice<DatasetSource>("format", "planetoid", ParseDatasetSource);
  c.dataset.path = ds.String("path", "");
  c.dataset.split_seed = ds.Unsigned("split_seed", 0);
  c.dataset.blocks = static_cast<int>(ds.Int("blocks", c.dataset.blocks));
  c.dataset.block_size = ds.Int("block_size", c.dataset.block_size);
  c.dataset.p_in = ds.Real("p_in", c.dataset.p_in);
  c.dataset.p_out = ds.Real("p_out", c.dataset.p_out);
  c.dataset.feature_signal = ds.Real("feature_signal", c.dataset.feature_signal);
  c.dataset.num_features = ds.Int("num_features", c.dataset.num_features);
  c.dataset.sbm_seed = ds.Unsigned("sbm_seed", 0);
  ds.Finish();
  if (c.dataset.source != DatasetSource::kSbm) {
    Require(!c.dataset.path.empty(), "dataset.path", "required for this format");
  } else {
    Require(c.dataset.blocks >= 1, "dataset.blocks", "must be positive");
    Require(c.dataset.block_size >= 2, "dataset.block_size", "must be at least 2");
    Require(c.dataset.num_features >= c.dataset.blocks, "dataset.num_features",
            "must be at least the number of blocks");
  }

  GcnConfig tdef;
  tdef.seed = c.seed;
  {
    const json* t = top.Raw("target");
    Section ts(t ? *t : json::object(), "target");
    c.target = ParseGcn(ts, tdef);
    ts.Finish();
  }

  if (const json* e = top.Raw("explainer"); e != nullptr && !e->is_null()) {
    Section es(*e, "explainer");
    ExplainOptions o;
    o.explainer = es.Choice<ExplainerId>("id", "grad", ParseExplainerId);
    o.seed = es.Unsigned("seed", c.seed);
    o.zorro.tau = es.Real("zorro_tau", o.zorro.tau);
    o.zorro.samples = static_cast<int>(es.Int("zorro_samples", o.zorro.samples));
    o.mask.epochs = static_cast<int>(es.Int("mask_epochs", o.mask.epochs));
    o.mask.lr = es.Real("mask_lr", o.mask.lr);
    o.mask.reg_size = es.Real("mask_reg_size", o.mask.reg_size);
    o.mask.reg_entropy = es.Real("mask_reg_entropy", o.mask.reg_entropy);
    o.mask.init_std = es.Real("mask_init_std", o.mask.init_std);
    o.mask.samples = static_cast<int>(es.Int("mask_samples", o.mask.samples));
    o.glime.lambda = es.Real("glime_lambda", o.glime.lambda);
    o.glime.max_nodes = es.Int("glime_max_nodes", o.glime.max_nodes);
    es.Finish();
    Require(o.zorro.tau > 0.0 && o.zorro.tau <= 1.0, "explainer.zorro_tau", "must lie in (0, 1]");
    Require(o.zorro.samples > 0, "explainer.zorro_samples", "must be positive");
    Require(o.mask.samples > 0, "explainer.mask_samples", "must be positive");
    Require(o.glime.lambda >= 0.0, "explainer.glime_lambda", "must be >= 0");
    c.explainer = o;
  }

  if (const json* d = top.Raw("defense"); d != nullptr && !d->is_null()) {
    Section s(*d, "defense");
    DefenseConfig dc;
    dc.epsilon = s.Budget("epsilon", dc.epsilon);
    s.Finish();
    Require(dc.epsilon > 0.0, "defense.epsilon", "must be positive");
    c.defense = dc;
  }

  {
    const json* a = top.Raw("attack");
    Section s(a ? *a : json::object(), "attack");
    try {
      ParseAttackVariant(c.attack, s.String("variant", "explain_sim"));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("attack.variant: ") + e.what());
    }
    GslConfig& gc = c.attack.gsl;
    gc.epochs = static_cast<int>(s.Int("epochs", gc.epochs));
    gc.lr = s.Real("lr", gc.lr);
    gc.hidden = s.Int("hidden", gc.hidden);
    gc.dropout = s.Real("dropout", gc.dropout);
    gc.noise_ratio = s.Real("noise_ratio", gc.noise_ratio);
    gc.negative_ratio = static_cast<int>(s.Int("negative_ratio", gc.negative_ratio));
    gc.classifier_lr = s.Real("classifier_lr", gc.classifier_lr);
    gc.classifier_hidden = s.Int("classifier_hidden", gc.classifier_hidden);
    gc.classifier_dropout = s.Real("classifier_dropout", gc.classifier_dropout);
    gc.warmup_fraction = s.Real("warmup_fraction", gc.warmup_fraction);
    gc.explanation_weight = s.Real("explanation_weight", gc.explanation_weight);
    gc.single_precision = s.Bool("single_precision", gc.single_precision);
    c.attack.partial_nodes = s.Real("partial_nodes", 1.0);
    c.attack.black_box_labels = s.Bool("black_box_labels", false);
    GcnConfig rdef;
    rdef.seed = c.seed;
    {
      const json* r = s.Raw("reference");
      Section rs(r ? *r : json::object(), "attack.reference");
      c.attack.reference = ParseGcn(rs, rdef);
      rs.Finish();
    }
    s.Finish();
    Require(gc.epochs >= 0, "attack.epochs", "must be >= 0");
    Require(gc.hidden > 0, "attack.hidden", "must be positive");
    Require(gc.noise_ratio > 0.0 && gc.noise_ratio <= 1.0, "attack.noise_ratio",
            "must lie in (0, 1]");
    Require(gc.warmup_fraction >= 0.0 && gc.warmup_fraction <= 1.0, "attack.warmup_fraction",
            "must lie in [0, 1]");
    Require(c.attack.partial_nodes > 0.0 && c.attack.partial_nodes <= 1.0,
            "attack.partial_nodes", "must lie in (0, 1]");
  }

  {
    const json* p = top.Raw("protocol");
    Section s(p ? *p : json::object(), "protocol");
    c.protocol.mode = s.Choice<ProtocolMode>("mode", "runs10", ParseProtocolMode);
    c.protocol.seeds = s.UnsignedList("seeds", c.protocol.seeds);
    c.protocol.probe_fraction = s.Real("probe_fraction", c.protocol.probe_fraction);
    s.Finish();
    Require(!c.protocol.seeds.empty(), "protocol.seeds", "must not be empty");
    Require(c.protocol.probe_fraction > 0.0 && c.protocol.probe_fraction <= 1.0,
            "protocol.probe_fraction", "must lie in (0, 1]");
  }

  if (const json* f = top.Raw("fidelity"); f != nullptr && !f->is_null()) {
    Section s(*f, "fidelity");
    FidelityConfig fc;
    fc.samples = static_cast<int>(s.Int("samples", fc.samples));
    fc.nodes = s.Int("nodes", fc.nodes);
    s.Finish();
    Require(fc.samples > 0, "fidelity.samples", "must be positive");
    Require(fc.nodes >= 0, "fidelity.nodes", "must be >= 0");
    c.fidelity = fc;
  }

  if (const json* a = top.Raw("advantage"); a != nullptr && !a->is_null()) {
    Section s(*a, "advantage");
    AdvantageStageConfig ac;
    const std::string input = s.String("input", "explanations");
    if (input == "explanations") {
      ac.input = AdvantageInput::kExplanations;
    } else if (input == "features_plus_explanations") {
      ac.input = AdvantageInput::kFeaturesPlusExplanations;
    } else {
      throw ConfigError("advantage.input: unknown input '" + input + "'");
    }
    ac.sample_seed = s.Unsigned("sample_seed", c.seed);
    ac.max = s.Bool("max", true);
    ac.slaps = s.Bool("slaps", false);
    {
      const json* gj = s.Raw("gcn");
      Section gs(gj ? *gj : json::object(), "advantage.gcn");
      ac.gcn = ParseGcn(gs, c.target);
      gs.Finish();
    }
    s.Finish();
    c.advantage = ac;
  }
  top.Finish();
  CheckDependencies(c);
  return c;
}

void CheckDependencies(const ExperimentConfig& c) {
  const bool have_e = c.explainer.has_value();
  if (NeedsExplanations(c.attack) && !have_e) {
    throw ConfigError("attack.variant: '" + c.attack.variant +
                      "' needs explanations; add an explainer stage");
  }
  if (c.defense && !have_e) {
    throw ConfigError("defense: needs explanations; add an explainer stage");
  }
  if (c.fidelity && !have_e) {
    throw ConfigError("fidelity: needs explanations; add an explainer stage");
  }
  if (c.advantage) {
    if (c.attack.kind != AttackKind::kGsl) {
      throw ConfigError("advantage: needs a structure-learning attack, got '" +
                        c.attack.variant + "'");
    }
    if (!have_e) throw ConfigError("advantage: needs explanations; add an explainer stage");
  }
}

json ToJson(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  json ds = {{"format", ToString(c.dataset.source)},
             {"path", c.dataset.path.string()},
             {"split_seed", c.dataset.split_seed}};
  if (c.dataset.source == DatasetSource::kSbm) {
    ds["blocks"] = c.dataset.blocks;
    ds["block_size"] = c.dataset.block_size;
    ds["p_in"] = c.dataset.p_in;
    ds["p_out"] = c.dataset.p_out;
    ds["feature_signal"] = c.dataset.feature_signal;
    ds["num_features"] = c.dataset.num_features;
    ds["sbm_seed"] = c.dataset.sbm_seed;
  }
  j["dataset"] = ds;
  j["target"] = GcnJson(c.target);
  j["explainer"] = c.explainer ? ExplainerJson(*c.explainer) : json(nullptr);
  j["defense"] = c.defense ? json{{"epsilon", EpsilonJson(c.defense->epsilon)}} : json(nullptr);
  json a = ToJson(c.attack.gsl);
  a["variant"] = c.attack.variant;
  a["partial_nodes"] = c.attack.partial_nodes;
  a["black_box_labels"] = c.attack.black_box_labels;
  a["reference"] = GcnJson(c.attack.reference);
  j["attack"] = a;
  j["protocol"] = {{"mode", ToString(c.protocol.mode)},
                   {"seeds", c.protocol.seeds},
                   {"probe_fraction", c.protocol.probe_fraction}};
  j["fidelity"] = c.fidelity ? json{{"samples", c.fidelity->samples}, {"nodes", c.fidelity->nodes}}
                             : json(nullptr);
  if (c.advantage) {
    j["advantage"] = {{"input", ToString(c.advantage->input)},
                      {"sample_seed", c.advantage->sample_seed},
                      {"max", c.advantage->max},
                      {"slaps", c.advantage->slaps},
                      {"gcn", GcnJson(c.advantage->gcn)}};
  } else {
    j["advantage"] = nullptr;
  }
  return j;
}

json ReadJsonFile(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

void SetPath(json& doc, const std::string& dotted, const json& value) {
  json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot - start);
    if (part.empty()) throw ConfigError("bad key path '" + dotted + "'");
    if (dot == std::string::npos) {
      (*cur)[part] = value;
      return;
    }
    json& next = (*cur)[part];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) {
      throw ConfigError(dotted.substr(0, dot) + ": not an object, cannot set '" + dotted + "'");
    }
    cur = &next;
    start = dot + 1;
  }
}

std::string ToString(Stage s) {
  switch (s) {
    case Stage::kExplain: return "explain";
    case Stage::kDefend: return "defend";
    case Stage::kAttack: return "attack";
    case Stage::kAdvantage: return "advantage";
    case Stage::kAll: return "run";
  }
  return "run";
}

std::string DatasetHash(const AttributedGraph& g) {
  std::string s = MatrixHash(g.features);
  s += ContentHash(json(g.labels).dump());
  json e = json::array();
  for (const auto& [u, v] : g.edges) e.push_back({u, v});
  s += ContentHash(e.dump());
  s += ContentHash(json({g.splits.train, g.splits.val, g.splits.test}).dump());
  return ContentHash(s);
}

AttributedGraph LoadDataset(const DatasetConfig& c) {
  switch (c.source) {
    case DatasetSource::kPlanetoid:
      return LoadGraph(c.path, GraphFormat::kPlanetoidRaw, c.split_seed);
    case DatasetSource::kCanonical:
      return LoadGraph(c.path, GraphFormat::kCanonical, c.split_seed);
    case DatasetSource::kSbm: {
      SbmOptions o;
      o.sizes.assign(static_cast<std::size_t>(c.blocks), c.block_size);
      o.p_in = c.p_in;
      o.p_out = c.p_out;
      o.feature_signal = c.feature_signal;
      o.num_features = c.num_features;
      return SynthSbm(c.blocks, o, RngStream(c.sbm_seed));
    }
  }
  throw ConfigError("dataset: unknown format");
}

PipelineResult RunStage(const ExperimentConfig& c, Stage stage, const PipelineOptions& options) {
  CheckDependencies(c);
  Run run(c, options);
  run.g = LoadDataset(c.dataset);
  run.dataset_hash = DatasetHash(run.g);
  EnsureDir(options.out_dir);
  run.Emit("config.json", json::object());

  const bool all = stage == Stage::kAll;
  const bool explain_stage = all || stage == Stage::kExplain;
  const bool defend_stage = all || stage == Stage::kDefend;

  if (stage == Stage::kDefend && !c.defense) {
    throw ConfigError("defense: the defend command needs a defense section");
  }
  if (stage == Stage::kAdvantage && !c.advantage) {
    throw ConfigError("advantage: the advantage command needs an advantage section");
  }

  std::optional<GcnModel> target;
  const bool want_target =
      stage == Stage::kExplain || c.explainer.has_value() || NeedsTarget(c);
  if (want_target) target = run.Target(explain_stage);

  std::optional<ExplanationSet> clean;
  std::optional<ExplanationSet> released;
  if (c.explainer) {
    clean = run.Explanations(*target, explain_stage);
    if (c.defense && stage != Stage::kExplain) {
      released = run.Defended(*clean, defend_stage);
    } else {
      released = clean;
    }
    if (c.fidelity) {
      const bool own = c.defense ? defend_stage : explain_stage;
      if (own) run.Quality(*target, *released, c.defense ? &*clean : nullptr);
    }
  }
  const ExplanationSet* rel = released ? &*released : nullptr;
  if (all || stage == Stage::kAttack) run.Attack(target, rel);
  if (c.advantage && (all || stage == Stage::kAdvantage)) {
    run.Advantage(target, rel, all);
  }
  run.result.cache_hits = run.cache.hits;
  return std::move(run.result);
}

// ---------------------------------------------------------------------------
// Sweep.

std::size_t SweepGrid::size() const {
  if (keys.empty()) return 0;
  std::size_t n = 1;
  for (const auto& v : values) n *= v.size();
  return n;
}

std::vector<json> SweepGrid::Cell(std::size_t index) const {
  std::vector<json> out(keys.size());
  for (std::size_t k = keys.size(); k-- > 0;) {
    out[k] = values[k][index % values[k].size()];
    index /= values[k].size();
  }
  return out;
}

SweepGrid ParseSweep(const json& sweep) {
  if (!sweep.is_object() || sweep.empty()) {
    throw ConfigError("sweep: expected a nonempty object of key -> list");
  }
  SweepGrid g;
  for (auto it = sweep.begin(); it != sweep.end(); ++it) {
    if (!it->is_array() || it->empty()) {
      throw ConfigError("sweep." + it.key() + ": expected a nonempty list");
    }
    g.keys.push_back(it.key());
    g.values.emplace_back(it->begin(), it->end());
  }
  return g;
}

namespace {

std::string CellId(std::size_t index, std::size_t total) {
  const std::size_t width = std::to_string(total == 0 ? 0 : total - 1).size();
  std::string s = std::to_string(index);
  return "cell-" + std::string(width - std::min(width, s.size()), '0') + s;
}

std::string CsvField(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  }
  return s;
}

std::string Num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct CellOutcome {
  bool ok = false;
  std::string error;
  PipelineResult result;
};

}  // namespace

SweepOutcome RunSweep(const json& base, const SweepGrid& grid, const PipelineOptions& options,
                      int jobs) {
  const std::size_t total = grid.size();
  if (total == 0) throw ConfigError("sweep: empty grid");
  const fs::path cells_dir = options.out_dir / "cells";
  EnsureDir(cells_dir);
  const fs::path cache = options.cache_dir.empty() ? options.out_dir / "cache" : options.cache_dir;

  std::vector<CellOutcome> outcomes(total);
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  const auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::string id = CellId(i, total);
      const fs::path final_dir = cells_dir / id;
      const fs::path tmp_dir = cells_dir / (id + ".tmp");
      CellOutcome& out = outcomes[i];
      try {
        json doc = base;
        const std::vector<json> cell = grid.Cell(i);
        for (std::size_t k = 0; k < grid.keys.size(); ++k) SetPath(doc, grid.keys[k], cell[k]);
        const ExperimentConfig cfg = ParseConfig(doc);
        fs::remove_all(tmp_dir);
        PipelineOptions o = options;
        o.out_dir = tmp_dir;
        o.cache_dir = cache;
        if (options.log) {
          o.log = [&, id](const std::string& s) {
            std::lock_guard<std::mutex> lock(log_mu);
            options.log(id + ": " + s);
          };
        }
        out.result = RunStage(cfg, Stage::kAll, o);
        fs::remove_all(final_dir);
        fs::rename(tmp_dir, final_dir);
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
        if (options.log) {
          std::lock_guard<std::mutex> lock(log_mu);
          options.log(id + ": failed: " + out.error);
        }
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(total)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SweepOutcome so;
  so.cells = total;
  std::ostringstream csv;
  csv << "# config: " << base.dump() << '\n';
  csv << "cell";
  for (const auto& k : grid.keys) csv << ',' << CsvField(k);
  csv << ",status,mean_auc,std_auc,mean_ap,std_ap,fidelity,sparsity,advantage\n";
  json failures = json::array();
  for (std::size_t i = 0; i < total; ++i) {
    const CellOutcome& o = outcomes[i];
    const std::vector<json> cell = grid.Cell(i);
    csv << CellId(i, total);
    for (const json& v : cell) csv << ',' << CsvField(v);
    csv << ',' << (o.ok ? "ok" : "failed");
    if (o.ok && o.result.attack) {
      const AttackReport& a = *o.result.attack;
      csv << ',' << Num(a.mean_auc) << ',' << Num(a.std_auc) << ',' << Num(a.mean_ap) << ','
          << Num(a.std_ap);
    } else {
      csv << ",,,,";
    }
    csv << ',' << (o.ok && o.result.fidelity ? Num(o.result.fidelity->mean_fidelity) : "");
    csv << ',' << (o.ok && o.result.fidelity ? Num(o.result.fidelity->sparsity) : "");
    csv << ',' << (o.ok && o.result.advantage ? Num(o.result.advantage->accuracy) : "");
    csv << '\n';
    if (!o.ok) {
      ++so.failed;
      json assign = json::object();
      for (std::size_t k = 0; k < grid.keys.size(); ++k) assign[grid.keys[k]] = cell[k];
      failures.push_back({{"cell", CellId(i, total)}, {"assignment", assign}, {"error", o.error}});
    }
  }
  so.merged_csv = options.out_dir / "sweep.csv";
  WriteTextAtomic(so.merged_csv, csv.str());
  const fs::path fail_file = options.out_dir / "failures.json";
  if (so.failed > 0) {
    WriteTextAtomic(fail_file, json{{"config", base}, {"failures", failures}}.dump(2) + "\n");
  } else {
    fs::remove(fail_file);
  }
  return so;
}

std::string Report(const fs::path& dir) {
  std::ostringstream os;
  bool any = false;
  const auto read = [&](const std::string& name) -> std::optional<json> {
    const fs::path f = dir / name;
    if (!fs::exists(f)) return std::nullopt;
    any = true;
    return ReadJsonFile(f);
  };
  if (auto a = read("attack_report.json")) {
    const AttackReport r = AttackReportFromJson(*a);
    os << "attack " << r.attack << " (" << ToString(r.mode) << ", " << r.runs.size()
       << " runs): AUC " << Num(r.mean_auc) << " +- " << Num(r.std_auc) << ", AP "
       << Num(r.mean_ap) << " +- " << Num(r.std_ap) << '\n';
  }
  if (auto f = read("fidelity_report.json")) {
    os << "explainer " << f->at("explainer").get<std::string>() << ": fidelity "
       << Num(f->at("mean_fidelity").get<double>()) << ", sparsity "
       << Num(f->at("sparsity").get<double>());
    if (!f->at("intersection").is_null()) {
      os << ", intersection " << Num(f->at("intersection").get<double>()) << '%';
    }
    os << '\n';
  }
  if (auto v = read("advantage_report.json")) {
    os << "advantage (" << v->at("input_kind").get<std::string>() << " over "
       << v->at("adj_source").get<std::string>() << "): accuracy "
       << Num(v->at("accuracy").get<double>());
    if (!v->at("slaps_acc").is_null()) os << ", slaps " << Num(v->at("slaps_acc").get<double>());
    if (!v->at("max_acc").is_null()) os << ", max " << Num(v->at("max_acc").get<double>());
    os << '\n';
  }
  if (fs::exists(dir / "sweep.csv")) {
    any = true;
    std::ifstream in(dir / "sweep.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') os << line << '\n';
    }
    if (fs::exists(dir / "failures.json")) {
      const json f = ReadJsonFile(dir / "failures.json");
      os << f.at("failures").size() << " failed cell(s), see failures.json\n";
    }
  }
  if (!any) throw ConfigError(dir.string() + ": no reports found");
  return os.str();
}

}  // namespace graphleak
