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


#include "graphleak/attacks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "graphleak/hash.hpp"
#include "graphleak/optim.hpp"

namespace graphleak {

namespace {

// Rows normalized to unit length and stored as columns; zero rows stay zero.
Matrix UnitColumns(const Matrix& rows) {
  Matrix t = rows.transpose();
  for (Index j = 0; j < t.cols(); ++j) {
    const double norm = t.col(j).norm();
    if (norm > 0.0) {
      t.col(j) /= norm;
    } else {
      t.col(j).setZero();
    }
  }
  return t;
}

// Both cosine paths go through this so a pair always gets the same bits.
double CosineOf(const Matrix& unit, Index u, Index v) {
  if (u > v) std::swap(u, v);
  return unit.col(u).dot(unit.col(v));
}

void CheckProbes(const EdgeProbeSet& probes, Index n, const char* what) {
  for (const ProbePair& p : probes.pairs) {
    if (p.u < 0 || p.v < 0 || p.u >= n || p.v >= n) {
      throw DimensionError(std::string(what) + ": probe endpoint outside " +
                           std::to_string(n) + " rows");
    }
  }
}

bool IsBinary(const Matrix& m) {
  return ((m.array() == 0.0) || (m.array() == 1.0)).all();
}

double Rms(const Matrix& m) {
  return m.size() == 0 ? 0.0 : std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
}

Matrix ScaledToUnitRms(const Matrix& m) {
  const double r = Rms(m);
  return r > 0.0 ? Matrix(m / r) : m;
}

template <typename S>
SpMat<S> SparseOf(const Matrix& dense) {
  std::vector<Eigen::Triplet<S>> trip;
  for (Index j = 0; j < dense.cols(); ++j) {
    for (Index i = 0; i < dense.rows(); ++i) {
      if (dense(i, j) != 0.0) trip.emplace_back(i, j, static_cast<S>(dense(i, j)));
    }
  }
  SpMat<S> s(dense.rows(), dense.cols());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

Matrix ZeroDiagonal(Matrix m) {
  m.diagonal().setZero();
  return m;
}

Matrix ProjectSymmetrize(const Matrix& theta) {
  Matrix p = theta.cwiseMax(0.0).cwiseMin(1.0);
  const Index n = p.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double v = 0.5 * (p(i, j) + p(j, i));
      p(i, j) = v;
      p(j, i) = v;
    }
  }
  return p;
}

// One denoising autoencoder: a two-layer GCN over the learned adjacency that
// reconstructs corrupted entries of its input.
template <typename S>
struct DaeBranch {
  Matrix original;
  DaeKind kind = DaeKind::kBinary;
  Tensor<S> w1;
  Tensor<S> w2;
  RngStream rng;
  double weight = 1.0;
  bool explanation = false;
};

template <typename S>
DaeBranch<S> MakeBranch(const Matrix& input, bool explanation, const GslConfig& cfg,
                        RngStream rng) {
  DaeBranch<S> b;
  b.kind = IsBinary(input) ? DaeKind::kBinary : DaeKind::kContinuous;
  b.original = b.kind == DaeKind::kBinary ? input : ScaledToUnitRms(input);
  RngStream r1 = rng.Derive(0);
  RngStream r2 = rng.Derive(1);
  b.w1 = Tensor<S>(GlorotUniform(input.cols(), cfg.hidden, r1).cast<S>());
  b.w2 = Tensor<S>(GlorotUniform(cfg.hidden, input.cols(), r2).cast<S>());
  b.rng = rng.Derive(2);
  b.explanation = explanation;
  return b;
}

// has_loss is false when no entry was corrupted.
template <typename S>
ad::Var<S> DaeStep(ad::Tape<S>& tape, ad::Var<S> adj, DaeBranch<S>& b,
                   const GslConfig& cfg, int epoch, bool& has_loss) {
  const Matrix& x = b.original;
  const Index n = x.rows();
  RngStream r = b.rng.Derive(static_cast<std::uint64_t>(epoch));
  NoiseSpec spec{cfg.noise_ratio, b.kind == DaeKind::kBinary
                                      ? NoiseMode::kBinaryFlipOnes
                                      : NoiseMode::kGaussianAdditive};
  Corruption c = CorruptWithPositions(x, spec, r);
  std::vector<std::pair<Index, Index>> idx;
  idx.reserve(c.positions.size() * static_cast<std::size_t>(1 + cfg.negative_ratio));
  for (Index pos : c.positions) idx.emplace_back(pos % n, pos / n);
  if (b.kind == DaeKind::kBinary && cfg.negative_ratio > 0 &&
      x.size() > static_cast<Index>(x.sum())) {
    const std::size_t want = c.positions.size() * static_cast<std::size_t>(cfg.negative_ratio);
    const auto cells = static_cast<std::uint64_t>(x.size());
    while (idx.size() < c.positions.size() + want) {
      const auto pos = static_cast<Index>(r.Below(cells));
      if (x(pos % n, pos / n) == 0.0) idx.emplace_back(pos % n, pos / n);
    }
  }
  has_loss = !idx.empty();
  if (!has_loss) return adj;
  Mat<S> targets(static_cast<Index>(idx.size()), 1);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    targets(static_cast<Index>(k), 0) = static_cast<S>(x(idx[k].first, idx[k].second));
  }
  ad::Var<S> xw = b.kind == DaeKind::kBinary
                      ? ad::SpMM(SparseOf<S>(c.values), tape.Leaf(b.w1))
                      : ad::MatMul(tape.Constant(c.values.cast<S>()), tape.Leaf(b.w1));
  auto h = ad::Relu(ad::MatMul(adj, xw));
  h = ad::Dropout(h, cfg.dropout, r);
  auto decoded = ad::GatherProducts(ad::MatMul(adj, h), tape.Leaf(b.w2), idx);
  return DaeLoss(decoded, targets, b.kind);
}

template <typename S>
GslResult RunGsl(GslVariant variant, const GslInputs& in, const GslConfig& cfg,
                 RngStream rng) {
  const bool needs_x = variant != GslVariant::kGse;
  const bool drop_expl = variant == GslVariant::kGsef && cfg.explanation_weight == 0.0;
  const bool needs_e = variant != GslVariant::kSlaps && !drop_expl;
  const std::string name = ToString(variant);
  if (in.labels == nullptr) throw ConfigError(name + ": labels are required");
  if (needs_x && in.features == nullptr) throw ConfigError(name + ": node features are required");
  if (needs_e && in.explanations == nullptr) {
    throw ConfigError(name + ": explanations are required");
  }
  if (in.num_classes < 1) throw ConfigError(name + ": num_classes must be positive");
  if (in.train.empty()) throw ConfigError(name + ": no labeled training nodes");
  if (cfg.epochs < 0) throw ConfigError(name + ": epochs must be >= 0");
  const Index n = needs_x ? in.features->rows() : in.explanations->rows();
  if (needs_x && needs_e && in.explanations->rows() != n) {
    throw DimensionError(name + ": features and explanations disagree on node count");
  }
  if (variant == GslVariant::kGsefMult &&
      in.explanations->cols() != in.features->cols()) {
    throw DimensionError(name + ": elementwise product needs equal widths");
  }
  if (static_cast<Index>(in.labels->size()) != n) {
    throw DimensionError(name + ": label count differs from node count");
  }

  // Generator inputs and denoising branches per variant.
  std::vector<Matrix> gen_inputs;
  std::vector<DaeBranch<S>> branches;
  const RngStream feat_rng = rng.Derive(0);
  const RngStream expl_rng = rng.Derive(1);
  Matrix expl;
  if (needs_e) expl = *in.explanations;
  switch (variant) {
    case GslVariant::kGsef:
      gen_inputs.push_back(*in.features);
      branches.push_back(MakeBranch<S>(*in.features, false, cfg, feat_rng));
      if (!drop_expl) {
        gen_inputs.push_back(expl);
        branches.push_back(MakeBranch<S>(expl, true, cfg, expl_rng));
        branches.back().weight = cfg.explanation_weight;
      }
      break;
    case GslVariant::kGsefConcat: {
      const double fx = in.features->norm();
      const double fe = expl.norm();
      Matrix joined(n, in.features->cols() + expl.cols());
      joined << *in.features, (fe > 0.0 ? Matrix(expl * (fx / fe)) : expl);
      gen_inputs.push_back(std::move(joined));
      branches.push_back(MakeBranch<S>(*in.features, false, cfg, feat_rng));
      branches.push_back(MakeBranch<S>(expl, true, cfg, expl_rng));
      break;
    }
    case GslVariant::kGsefMult: {
      Matrix product = in.features->cwiseProduct(expl);
      gen_inputs.push_back(product);
      branches.push_back(MakeBranch<S>(*in.features, false, cfg, feat_rng));
      branches.push_back(MakeBranch<S>(product, true, cfg, expl_rng));
      break;
    }
    case GslVariant::kGse:
      gen_inputs.push_back(expl);
      branches.push_back(MakeBranch<S>(expl, true, cfg, expl_rng));
      break;
    case GslVariant::kSlaps:
      gen_inputs.push_back(*in.features);
      branches.push_back(MakeBranch<S>(*in.features, false, cfg, feat_rng));
      break;
  }

  std::vector<GeneratorState<S>> gens;
  for (std::size_t k = 0; k < gen_inputs.size(); ++k) {
    const GeneratorSource src =
        variant == GslVariant::kGsefConcat ? GeneratorSource::kConcat
        : variant == GslVariant::kGsefMult ? GeneratorSource::kMult
        : (variant == GslVariant::kGse || k == 1) ? GeneratorSource::kExplanations
                                                   : GeneratorSource::kFeatures;
    gens.push_back(InitGenerator<S>(gen_inputs[k], src));
  }
  gen_inputs.clear();

  // Classifier on the learned graph; not the target model.
  const Matrix cls_input = needs_x ? *in.features : ScaledToUnitRms(expl);
  const bool cls_sparse = IsBinary(cls_input);
  const SpMat<S> cls_x_sparse = cls_sparse ? SparseOf<S>(cls_input) : SpMat<S>();
  const Mat<S> cls_x_dense = cls_sparse ? Mat<S>() : Mat<S>(cls_input.cast<S>());
  const RngStream cls_rng = rng.Derive(2);
  RngStream c1 = cls_rng.Derive(0);
  RngStream c2 = cls_rng.Derive(1);
  RngStream cls_drop = cls_rng.Derive(2);
  Tensor<S> cw1(GlorotUniform(cls_input.cols(), cfg.classifier_hidden, c1).cast<S>());
  Tensor<S> cw2(GlorotUniform(cfg.classifier_hidden, in.num_classes, c2).cast<S>());

  std::vector<Tensor<S>*> ss_params;
  for (auto& g : gens) ss_params.push_back(&g.theta);
  for (auto& b : branches) {
    ss_params.push_back(&b.w1);
    ss_params.push_back(&b.w2);
  }
  Adam<S> ss_opt(ss_params, {.lr = cfg.lr});
  Adam<S> cls_opt({&cw1, &cw2}, {.lr = cfg.classifier_lr});

  GslResult result;
  const int warmup = static_cast<int>(std::floor(cfg.warmup_fraction * cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape<S> tape;
    ad::Var<S> s = GeneratorAdjacency(tape, gens[0]);
    if (gens.size() == 2) s = ad::Clamp01(ad::Add(s, GeneratorAdjacency(tape, gens[1])));
    const ad::Var<S> adj = ad::DegreeNormalize(s);

    LossBreakdown lb;
    ad::Var<S> total;
    bool have_total = false;
    const auto add_term = [&](ad::Var<S> term) {
      total = have_total ? ad::Add(total, term) : term;
      have_total = true;
    };
    for (auto& b : branches) {
      bool has_loss = false;
      ad::Var<S> l = DaeStep(tape, adj, b, cfg, epoch, has_loss);
      if (!has_loss) continue;
      if (b.weight != 1.0) l = ad::Scale(l, static_cast<S>(b.weight));
      (b.explanation ? lb.l_dae_explanations : lb.l_dae_features) += l.item();
      add_term(l);
    }
    const bool classify = epoch >= warmup;
    if (classify) {
      ad::Var<S> xw = cls_sparse ? ad::SpMM(cls_x_sparse, tape.Leaf(cw1))
                                 : ad::MatMul(tape.ConstantRef(cls_x_dense), tape.Leaf(cw1));
      auto h = ad::Dropout(ad::Relu(ad::MatMul(adj, xw)), cfg.classifier_dropout, cls_drop);
      auto logits = ad::MatMul(adj, ad::MatMul(h, tape.Leaf(cw2)));
      auto ce = ad::CrossEntropyRows(logits, *in.labels, in.train);
      lb.l_classification = ce.item();
      add_term(ce);
    }
    if (!have_total) break;
    lb.total = lb.l_dae_features + lb.l_dae_explanations + lb.l_classification;
    if (!std::isfinite(lb.total)) {
      throw TrainingError(name + ": non-finite loss", epoch);
    }
    ss_opt.ZeroGrad();
    cls_opt.ZeroGrad();
    tape.Backward(total);
    ss_opt.Step();
    if (classify) cls_opt.Step();
    result.history.push_back(lb);
  }

  Matrix score = ProjectSymmetrize(gens[0].theta.values.template cast<double>());
  if (gens.size() == 2) {
    score = (score + ProjectSymmetrize(gens[1].theta.values.template cast<double>()))
                .cwiseMin(1.0);
  }
  result.recon.edge_scores = ZeroDiagonal(std::move(score));
  result.recon.attack = name;
  nlohmann::json prov = ToJson(cfg);
  prov["variant"] = name;
  prov["seed_key"] = rng.key();
  result.recon.config_hash = ContentHash(prov.dump());
  return result;
}

}  // namespace

Matrix CosineSimilarity(const Matrix& rows) {
  const Matrix unit = UnitColumns(rows);
  const Index n = rows.rows();
  Matrix c(n, n);
  constexpr Index kBlock = 64;
  for (Index bi = 0; bi < n; bi += kBlock) {
    const Index ei = std::min(n, bi + kBlock);
    for (Index bj = 0; bj <= bi; bj += kBlock) {
      const Index ej = std::min(n, bj + kBlock);
      for (Index i = bi; i < ei; ++i) {
        for (Index j = bj; j < std::min(ej, i + 1); ++j) {
          const double v = CosineOf(unit, i, j);
          c(i, j) = v;
          c(j, i) = v;
        }
      }
    }
  }
  return c;
}

ProbeScores CosineScores(const Matrix& rows, const EdgeProbeSet& probes) {
  CheckProbes(probes, rows.rows(), "cosine_scores");
  const Matrix unit = UnitColumns(rows);
  ProbeScores out;
  out.reserve(probes.pairs.size());
  for (const ProbePair& p : probes.pairs) out.push_back(CosineOf(unit, p.u, p.v));
  return out;
}

ProbeScores ExplainSim(const ExplanationSet& e, const EdgeProbeSet& probes) {
  return CosineScores(e.scores, probes);
}

ProbeScores FeatureSim(const AttributedGraph& g, const EdgeProbeSet& probes) {
  return CosineScores(g.features, probes);
}

ProbeScores LsaPosterior(const GcnModel& target, const MlpModel& reference,
                         const AttributedGraph& g, const EdgeProbeSet& probes) {
  if (!target.trained) throw ContractError("lsa: target model is untrained");
  if (!reference.trained) throw ContractError("lsa: reference model is untrained");
  const Matrix pt = Posteriors(target, g.features, NormalizeAdjacency(g.adjacency));
  const Matrix pr = Posteriors(reference, g.features);
  const ProbeScores st = CosineScores(pt, probes);
  const ProbeScores sr = CosineScores(pr, probes);
  ProbeScores out(st.size());
  for (std::size_t k = 0; k < st.size(); ++k) out[k] = 0.5 * (st[k] - sr[k] + 1.0);
  return out;
}

Matrix GeneratorForward(const Matrix& theta) {
  if (theta.rows() != theta.cols()) {
    throw DimensionError("generator: theta not square " +
                         ShapeString(theta.rows(), theta.cols()));
  }
  ad::Tape<double> tape;
  Tensor<double> t(theta, false);
  GeneratorState<double> state{t, GeneratorSource::kFeatures};
  return GeneratorForward(tape, state).value();
}

ReconScore CombineGenerators(const Matrix& a1, const Matrix& a2) {
  if (a1.rows() != a2.rows() || a1.cols() != a2.cols() || a1.rows() != a1.cols()) {
    throw DimensionError("combine_generators: " + ShapeString(a1.rows(), a1.cols()) +
                         " vs " + ShapeString(a2.rows(), a2.cols()));
  }
  ReconScore r;
  r.edge_scores = ZeroDiagonal((a1 + a2).cwiseMax(0.0).cwiseMin(1.0));
  r.attack = "combined";
  return r;
}

double DaeLoss(const Matrix& decoded, const Matrix& original, DaeKind kind,
               const std::vector<Index>& positions) {
  if (decoded.rows() != original.rows() || decoded.cols() != original.cols()) {
    throw DimensionError("dae_loss: " + ShapeString(decoded.rows(), decoded.cols()) +
                         " vs " + ShapeString(original.rows(), original.cols()));
  }
  if (positions.empty()) throw ContractError("dae_loss: no corrupted entries");
  double sum = 0.0;
  for (Index pos : positions) {
    if (pos < 0 || pos >= decoded.size()) throw DimensionError("dae_loss: position out of range");
    const double z = decoded(pos);
    const double t = original(pos);
    if (kind == DaeKind::kBinary) {
      if (t != 0.0 && t != 1.0) throw DomainError("dae_loss: binary target outside {0,1}");
      sum += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    } else {
      sum += (z - t) * (z - t);
    }
  }
  return sum / static_cast<double>(positions.size());
}

std::string ToString(GslVariant v) {
  switch (v) {
    case GslVariant::kGsef: return "gsef";
    case GslVariant::kGsefConcat: return "gsef_concat";
    case GslVariant::kGsefMult: return "gsef_mult";
    case GslVariant::kGse: return "gse";
    case GslVariant::kSlaps: return "slaps";
  }
  return "gsef";
}

GslVariant ParseGslVariant(const std::string& s) {
  std::string k;
  for (char ch : s) {
    if (ch == '-') ch = '_';
    k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (GslVariant v : {GslVariant::kGsef, GslVariant::kGsefConcat, GslVariant::kGsefMult,
                       GslVariant::kGse, GslVariant::kSlaps}) {
    if (ToString(v) == k) return v;
  }
  throw ConfigError("unknown attack variant '" + s + "'");
}

nlohmann::json ToJson(const GslConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"hidden", c.hidden},
          {"dropout", c.dropout},
          {"noise_ratio", c.noise_ratio},
          {"negative_ratio", c.negative_ratio},
          {"classifier_lr", c.classifier_lr},
          {"classifier_hidden", c.classifier_hidden},
          {"classifier_dropout", c.classifier_dropout},
          {"warmup_fraction", c.warmup_fraction},
          {"explanation_weight", c.explanation_weight},
          {"single_precision", c.single_precision}};
}

GslResult RunGslAttack(GslVariant variant, const GslInputs& inputs,
                       const GslConfig& config, RngStream rng) {
  return config.single_precision ? RunGsl<float>(variant, inputs, config, rng)
                                 : RunGsl<double>(variant, inputs, config, rng);
}

ProbeScores ScoreProbes(const ReconScore& recon, const EdgeProbeSet& probes) {
  CheckProbes(probes, recon.edge_scores.rows(), "score_probes");
  ProbeScores out;
  out.reserve(probes.pairs.size());
  for (const ProbePair& p : probes.pairs) out.push_back(recon.edge_scores(p.u, p.v));
  return out;
}

std::vector<std::pair<Index, Index>> SampleEdges(const ReconScore& recon, RngStream rng) {
  const Matrix& s = recon.edge_scores;
  std::vector<std::pair<Index, Index>> edges;
  for (Index u = 0; u < s.rows(); ++u) {
    for (Index v = u + 1; v < s.cols(); ++v) {
      if (rng.Uniform() < s(u, v)) edges.emplace_back(u, v);
    }
  }
  return edges;
}

Matrix SampleGraph(const ReconScore& recon, RngStream rng) {
  const Index n = recon.edge_scores.rows();
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [u, v] : SampleEdges(recon, rng)) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

void WriteProbeScoresCsv(const EdgeProbeSet& probes, const ProbeScores& scores,
                         const std::filesystem::path& file) {
  if (scores.size() != probes.pairs.size()) {
    throw DimensionError("probe scores: count differs from probe pairs");
  }
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  out << "u,v,label,score\n";
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const ProbePair& p = probes.pairs[k];
    out << p.u << ',' << p.v << ',' << (p.positive ? 1 : 0) << ',' << scores[k] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

void WriteReconBinary(const ReconScore& recon, const std::filesystem::path& file) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  const auto n = static_cast<std::uint64_t>(recon.edge_scores.rows());
  out.write("GLRS", 4);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
      recon.edge_scores;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

Matrix ReadReconBinary(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open " + file.string());
  char magic[4];
  std::uint64_t n = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, "GLRS", 4) != 0) {
    throw ParseError(file.string() + ": not a reconstruction file");
  }
  if (n > (1u << 20)) throw ParseError(file.string() + ": implausible size");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      static_cast<Index>(n), static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!in) throw ParseError(file.string() + ": truncated matrix");
  return rm;
}

}  // namespace graphleak
