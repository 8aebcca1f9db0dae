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

#include "graphleak/explain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "graphleak/ops.hpp"
#include "graphleak/optim.hpp"
#include "graphleak/tape.hpp"

namespace graphleak {

namespace fs = std::filesystem;
using json = nlohmann::json;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

constexpr const char* kExplainerNames[] = {"grad", "gradi", "zorro",
                                           "zorros", "glime", "gnnexp"};

int ArgMax(const Eigen::RowVectorXd& z) {
  Index best = 0;
  for (Index c = 1; c < z.size(); ++c) {
    if (z(c) > z(best)) best = c;
  }
  return static_cast<int>(best);
}

Index PositionOf(const std::vector<Index>& sorted, Index value) {
  return static_cast<Index>(std::lower_bound(sorted.begin(), sorted.end(), value) -
                            sorted.begin());
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
  return 0.5 * (lo + hi);
}

void CheckNode(const ExplainContext& ctx, Index node) {
  if (node < 0 || node >= ctx.graph().num_nodes()) {
    throw DomainError("node id " + std::to_string(node) + " out of range");
  }
}

}  // namespace

std::string ToString(ExplainerId id) { return kExplainerNames[static_cast<int>(id)]; }

ExplainerId ParseExplainerId(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  lower.erase(std::remove(lower.begin(), lower.end(), '-'), lower.end());
  lower.erase(std::remove(lower.begin(), lower.end(), '_'), lower.end());
  for (int k = 0; k < 6; ++k) {
    if (lower == kExplainerNames[k]) return static_cast<ExplainerId>(k);
  }
  if (lower == "gnnexplainer") return ExplainerId::kGnnExp;
  throw ConfigError("unknown explainer '" + s + "'");
}

std::string ToString(ExplanationKind kind) {
  return kind == ExplanationKind::kHard ? "hard" : "soft";
}

ExplanationKind ParseExplanationKind(const std::string& s) {
  if (s == "hard") return ExplanationKind::kHard;
  if (s == "soft") return ExplanationKind::kSoft;
  throw ParseError("unknown explanation kind '" + s + "'");
}

ExplanationKind KindOf(ExplainerId id) {
  return id == ExplainerId::kZorro ? ExplanationKind::kHard : ExplanationKind::kSoft;
}

void Validate(const ExplanationSet& e) {
  if (!e.scores.allFinite()) throw ValidationError("explanation has non-finite scores");
  if (e.kind == ExplanationKind::kHard &&
      !((e.scores.array() == 0.0) || (e.scores.array() == 1.0)).all()) {
    throw ValidationError("hard explanation with entries outside {0,1}");
  }
  if ((e.explainer == ExplainerId::kGnnExp || e.explainer == ExplainerId::kZorroS) &&
      !e.extra.contains("defense") &&
      ((e.scores.array() < 0.0) || (e.scores.array() > 1.0)).any()) {
    throw ValidationError("mask explanation with entries outside [0,1]");
  }
}

// --- NoiseModel --------------------------------------------------------------

NoiseModel::NoiseModel(const Matrix& x) {
  const Index n = x.rows();
  const Index d = x.cols();
  prob_.assign(static_cast<std::size_t>(d), 0.0);
  values_.assign(static_cast<std::size_t>(d), {});
  std::map<int, std::vector<Index>> by_level;
  for (Index f = 0; f < d; ++f) {
    auto& vals = values_[static_cast<std::size_t>(f)];
    for (Index i = 0; i < n; ++i) {
      if (x(i, f) != 0.0) vals.push_back(x(i, f));
    }
    if (vals.empty()) continue;
    prob_[static_cast<std::size_t>(f)] =
        static_cast<double>(vals.size()) / static_cast<double>(n);
    if (std::all_of(vals.begin(), vals.end(), [&](double v) { return v == vals[0]; })) {
      vals.resize(1);
    }
    // Level l holds rates in (2^-(l+1), 2^-l].
    const int level = std::min(60, static_cast<int>(std::floor(
                                       -std::log2(prob_[static_cast<std::size_t>(f)]))));
    by_level[level].push_back(f);
  }
  for (auto& [level, feats] : by_level) {
    buckets_.push_back({std::ldexp(1.0, -level), std::move(feats)});
  }
}

// --- ExplainContext ------------------------------------------------------------

ExplainContext::ExplainContext(const GcnModel& model, const AttributedGraph& graph)
    : model_(&model), graph_(&graph) {
  if (graph.num_features() != model.num_features()) {
    throw DimensionError("explain: model expects " +
                         std::to_string(model.num_features()) + " features, graph has " +
                         std::to_string(graph.num_features()));
  }
  a_hat_ = NormalizeAdjacency(graph.adjacency);
  x_sparse_ = graph.features.sparseView();
  Matrix xw = graph.features * model.w1;
  hidden_pre_ = a_hat_ * xw;
  Matrix hw = hidden_pre_.cwiseMax(0.0) * model.w2;
  logits_ = a_hat_ * hw;
  posteriors_ = Softmax(logits_);
  predictions_ = Predict(logits_);
  noise_ = NoiseModel(graph.features);
  w1_rows_ = model.w1;
}

LocalView ExplainContext::View(Index node) const {
  LocalView v;
  v.node = node;
  for (SparseMatrix::InnerIterator it(a_hat_, node); it; ++it) v.hop1.push_back(it.col());
  for (Index j : v.hop1) {
    for (SparseMatrix::InnerIterator it(a_hat_, j); it; ++it) v.hop2.push_back(it.col());
  }
  std::sort(v.hop2.begin(), v.hop2.end());
  v.hop2.erase(std::unique(v.hop2.begin(), v.hop2.end()), v.hop2.end());
  const auto n1 = static_cast<Index>(v.hop1.size());
  const auto n2 = static_cast<Index>(v.hop2.size());
  v.a.resize(n1);
  v.p = Matrix::Zero(n1, n2);
  for (Index r = 0; r < n1; ++r) {
    const Index j = v.hop1[static_cast<std::size_t>(r)];
    v.a(r) = a_hat_.coeff(node, j);
    for (SparseMatrix::InnerIterator it(a_hat_, j); it; ++it) {
      v.p(r, PositionOf(v.hop2, it.col())) = it.value();
    }
  }
  v.self_in_hop1 = PositionOf(v.hop1, node);
  v.self_in_hop2 = PositionOf(v.hop2, node);
  std::vector<Eigen::Triplet<double>> trips;
  for (Index k = 0; k < n2; ++k) {
    for (SparseMatrix::InnerIterator it(x_sparse_, v.hop2[static_cast<std::size_t>(k)]); it;
         ++it) {
      trips.emplace_back(k, it.col(), it.value());
    }
  }
  v.x.resize(n2, graph_->num_features());
  v.x.setFromTriplets(trips.begin(), trips.end());
  v.x.makeCompressed();
  return v;
}

Eigen::RowVectorXd ExplainContext::LocalLogits(const LocalView& v, const Matrix& t) const {
  const Matrix h = (v.p * t).cwiseMax(0.0);
  const Eigen::RowVectorXd r = v.a * h;
  return r * model_->w2;
}

// --- Grad ----------------------------------------------------------------------

namespace {

// hop2 x hidden coefficients c_k with d logit / d x_k = W1 c_k.
Matrix GradientCoefficients(const ExplainContext& ctx, const LocalView& v) {
  const GcnModel& m = ctx.model();
  const int pred = ctx.predictions()[static_cast<std::size_t>(v.node)];
  const auto n1 = static_cast<Index>(v.hop1.size());
  // Row r: a_r * 1[h_r > 0] * w2[:, pred] for hop-1 node r.
  Matrix gate(n1, m.hidden());
  for (Index r = 0; r < n1; ++r) {
    const Index j = v.hop1[static_cast<std::size_t>(r)];
    gate.row(r) = v.a(r) * (ctx.hidden_pre().row(j).array() > 0.0).cast<double>().matrix();
    gate.row(r).array() *= m.w2.col(pred).transpose().array();
  }
  return v.p.transpose() * gate;
}

}  // namespace

Matrix ReceptiveGradients(const ExplainContext& ctx, const LocalView& v) {
  return GradientCoefficients(ctx, v) * ctx.model().w1.transpose();
}

Matrix ReceptiveGradientsAutodiff(const ExplainContext& ctx, const LocalView& v) {
  const GcnModel& m = ctx.model();
  Tensor<double> x(Matrix(v.x), true);
  const Matrix a_row = v.a;
  ad::Tape<double> tape;
  auto t = ad::MatMul(tape.Leaf(x), tape.ConstantRef(m.w1));
  auto h = ad::Relu(ad::MatMul(tape.ConstantRef(v.p), t));
  auto out = ad::MatMul(ad::MatMul(tape.ConstantRef(a_row), h), tape.ConstantRef(m.w2));
  tape.Backward(ad::Entry(out, 0, ctx.predictions()[static_cast<std::size_t>(v.node)]));
  return x.grad;
}

namespace {

// Sums |weight(x) * g| over the observed entries of the receptive field.
template <typename Weight>
Vector AccumulateObserved(const ExplainContext& ctx, const LocalView& v, const Matrix* grads,
                          Weight&& weight) {
  const Index d = ctx.graph().num_features();
  Vector out = Vector::Zero(d);
  const Matrix coef = grads == nullptr ? GradientCoefficients(ctx, v) : Matrix();
  for (Index k = 0; k < v.x.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(v.x, k); it; ++it) {
      const double g = grads != nullptr ? (*grads)(k, it.col())
                                        : coef.row(k).dot(ctx.w1_rows().row(it.col()));
      out(it.col()) += std::abs(weight(it.value()) * g);
    }
  }
  return out;
}

}  // namespace

Vector ExplainGrad(const ExplainContext& ctx, Index node) {
  CheckNode(ctx, node);
  return AccumulateObserved(ctx, ctx.View(node), nullptr, [](double) { return 1.0; });
}

Vector ExplainGradAutodiff(const ExplainContext& ctx, Index node) {
  CheckNode(ctx, node);
  const LocalView v = ctx.View(node);
  const Matrix g = ReceptiveGradientsAutodiff(ctx, v);
  return AccumulateObserved(ctx, v, &g, [](double) { return 1.0; });
}

Vector ExplainGradInput(const ExplainContext& ctx, Index node) {
  CheckNode(ctx, node);
  return AccumulateObserved(ctx, ctx.View(node), nullptr, [](double x) { return x; });
}

Matrix ExplainGradAll(const ExplainContext& ctx) {
  const Index n = ctx.graph().num_nodes();
  Matrix out(n, ctx.graph().num_features());
  for (Index i = 0; i < n; ++i) out.row(i) = ExplainGrad(ctx, i).transpose();
  return out;
}

// --- RDT fidelity ------------------------------------------------------------------

double RdtFidelity(const ExplainContext& ctx, Index node, const Vector& mask,
                   int samples, RngStream& rng) {
  CheckNode(ctx, node);
  if (samples < 1) throw ContractError("rdt_fidelity: samples must be >= 1");
  if (mask.size() != ctx.graph().num_features()) {
    throw DimensionError("rdt_fidelity: mask length " + std::to_string(mask.size()));
  }
  const LocalView v = ctx.View(node);
  const auto& w1 = ctx.w1_rows();
  const Index n2 = static_cast<Index>(v.hop2.size());
  const Index h = w1.cols();
  RowMatrix t_full = RowMatrix::Zero(n2, h);
  RowMatrix t_masked = RowMatrix::Zero(n2, h);
  for (Index k = 0; k < n2; ++k) {
    for (SparseMatrix::InnerIterator it(v.x, k); it; ++it) {
      t_full.row(k) += it.value() * w1.row(it.col());
      const double mf = mask(it.col());
      if (mf == 1.0) {
        t_masked.row(k) += it.value() * w1.row(it.col());
      } else if (mf != 0.0) {
        t_masked.row(k) += (mf * it.value()) * w1.row(it.col());
      }
    }
  }
  const int ref = ArgMax(ctx.LocalLogits(v, t_full));
  int agree = 0;
  RowMatrix t(n2, h);
  for (int s = 0; s < samples; ++s) {
    t = t_masked;
    ctx.noise().Sample(n2, rng, [&](Index k, Index f, double z) {
      const double keep = 1.0 - mask(f);
      if (keep != 0.0) t.row(k) += (keep * z) * w1.row(f);
    });
    agree += ArgMax(ctx.LocalLogits(v, t)) == ref;
  }
  return static_cast<double>(agree) / static_cast<double>(samples);
}

// --- Zorro -------------------------------------------------------------------------

ZorroResult ExplainZorro(const ExplainContext& ctx, Index node,
                         const ZorroOptions& options, RngStream& rng) {
  CheckNode(ctx, node);
  if (!(options.tau >= 0.0) || options.tau > 1.0) {
    throw ContractError("zorro: tau must lie in [0,1]");
  }
  if (options.samples < 1) throw ContractError("zorro: samples must be >= 1");
  const LocalView v = ctx.View(node);
  const auto& w1 = ctx.w1_rows();
  const Matrix& w2 = ctx.model().w2;
  const Index d = ctx.graph().num_features();
  const Index h = w1.cols();
  const Index n1 = static_cast<Index>(v.hop1.size());
  const Index n2 = static_cast<Index>(v.hop2.size());
  const int samples = options.samples;

  struct Entry {
    Index k;
    Index f;
    double value;
  };
  std::vector<Entry> x_entries;
  for (Index k = 0; k < n2; ++k) {
    for (SparseMatrix::InnerIterator it(v.x, k); it; ++it) {
      x_entries.push_back({k, it.col(), it.value()});
    }
  }
  RowMatrix t_full = RowMatrix::Zero(n2, h);
  for (const auto& e : x_entries) t_full.row(e.k) += e.value * w1.row(e.f);
  const int ref = ArgMax(ctx.LocalLogits(v, t_full));

  ZorroResult result;
  result.mask = Vector::Zero(d);
  std::vector<char> in_mask(static_cast<std::size_t>(d), 0);
  std::vector<char> touched(static_cast<std::size_t>(d), 0);
  std::vector<Index> touched_list;
  std::vector<Index> slot(static_cast<std::size_t>(d), -1);
  std::vector<double> delta(static_cast<std::size_t>(d), 0.0);
  Matrix cbuf(n1, d);
  Matrix g(n1, h);
  Eigen::RowVectorXd r(h);
  Eigen::RowVectorXd z(w2.cols());

  auto agrees = [&](const Matrix& hm) {
    r.noalias() = v.a * hm.cwiseMax(0.0);
    z.noalias() = r * w2;
    return ArgMax(z) == ref;
  };

  Index selected = 0;
  for (int step = 0; selected < d; ++step) {
    RngStream srng = rng.Derive(static_cast<std::uint64_t>(step));
    RowMatrix t_mask = RowMatrix::Zero(n2, h);
    // c_x[f] = A_hat[hop1, hop2] * x[:, f] for unmasked features present in
    // the receptive field.
    std::vector<Index> x_feats;
    Matrix cx;
    {
      for (const auto& e : x_entries) {
        if (in_mask[static_cast<std::size_t>(e.f)]) {
          t_mask.row(e.k) += e.value * w1.row(e.f);
        } else if (slot[static_cast<std::size_t>(e.f)] < 0) {
          slot[static_cast<std::size_t>(e.f)] = static_cast<Index>(x_feats.size());
          x_feats.push_back(e.f);
        }
      }
      cx = Matrix::Zero(n1, static_cast<Index>(x_feats.size()));
      for (const auto& e : x_entries) {
        const Index sl = slot[static_cast<std::size_t>(e.f)];
        if (sl >= 0 && !in_mask[static_cast<std::size_t>(e.f)]) {
          cx.col(sl) += e.value * v.p.col(e.k);
        }
      }
    }
    std::fill(delta.begin(), delta.end(), 0.0);
    int base_total = 0;
    RowMatrix t(n2, h);
    std::vector<Entry> z_entries;
    for (int s = 0; s < samples; ++s) {
      t = t_mask;
      z_entries.clear();
      ctx.noise().Sample(n2, srng, [&](Index k, Index f, double val) {
        if (in_mask[static_cast<std::size_t>(f)]) return;
        t.row(k) += val * w1.row(f);
        z_entries.push_back({k, f, val});
      });
      const Matrix hm = v.p * t;
      const int base = agrees(hm);
      base_total += base;
      // Adding feature f replaces its noise column by the true column, which
      // shifts the first-layer pre-activation by (c_x[f] - c_z[f]) W1[f, :].
      for (std::size_t q = 0; q < x_feats.size(); ++q) {
        const Index f = x_feats[q];
        cbuf.col(f) = cx.col(static_cast<Index>(q));
        touched[static_cast<std::size_t>(f)] = 1;
        touched_list.push_back(f);
      }
      for (const auto& e : z_entries) {
        if (!touched[static_cast<std::size_t>(e.f)]) {
          touched[static_cast<std::size_t>(e.f)] = 1;
          touched_list.push_back(e.f);
          cbuf.col(e.f).setZero();
        }
        cbuf.col(e.f) -= e.value * v.p.col(e.k);
      }
      for (Index f : touched_list) {
        g.noalias() = hm + cbuf.col(f) * w1.row(f);
        delta[static_cast<std::size_t>(f)] += static_cast<double>(agrees(g) - base);
        touched[static_cast<std::size_t>(f)] = 0;
      }
      touched_list.clear();
    }
    for (Index f : x_feats) slot[static_cast<std::size_t>(f)] = -1;

    const double current = static_cast<double>(base_total) / samples;
    if (step == 0) result.initial_fidelity = current;
    if (current >= options.tau) break;
    Index best = -1;
    double best_fid = -1.0;
    for (Index f = 0; f < d; ++f) {
      if (in_mask[static_cast<std::size_t>(f)]) continue;
      const double fid = (base_total + delta[static_cast<std::size_t>(f)]) / samples;
      if (fid > best_fid) {
        best_fid = fid;
        best = f;
      }
    }
    in_mask[static_cast<std::size_t>(best)] = 1;
    result.mask(best) = 1.0;
    result.order.push_back(best);
    result.fidelity.push_back(best_fid);
    ++selected;
    if (best_fid >= options.tau) break;
  }
  return result;
}

// --- Mask optimizers -------------------------------------------------------------

namespace {

Tensor<double> InitMaskLogits(Index d, double init_std, RngStream& rng) {
  Matrix theta(d, 1);
  for (Index f = 0; f < d; ++f) theta(f, 0) = init_std * rng.Normal();
  return Tensor<double>(std::move(theta), true);
}

ad::Var<double> MaskRegularizers(ad::Var<double> mask, const MaskOptions& o) {
  auto size = ad::Scale(ad::Mean(mask), o.reg_size);
  auto ent = ad::Scale(ad::Mean(ad::BinaryEntropy(mask)), o.reg_entropy);
  return ad::Add(size, ent);
}

Vector SigmoidOf(const Matrix& theta) {
  return (1.0 / (1.0 + (-theta.col(0).array()).exp())).matrix();
}

}  // namespace

Vector ExplainGnnExp(const ExplainContext& ctx, Index node, const MaskOptions& o,
                     RngStream& rng) {
  CheckNode(ctx, node);
  const LocalView v = ctx.View(node);
  const GcnModel& m = ctx.model();
  const Index d = ctx.graph().num_features();
  Tensor<double> theta = InitMaskLogits(d, o.init_std, rng);
  const Matrix a_row = v.a;
  const std::vector<int> target{ctx.predictions()[static_cast<std::size_t>(node)]};
  const std::vector<Index> row0{0};
  Adam<double> opt({&theta}, {.lr = o.lr});
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    ad::Tape<double> tape;
    auto mask = ad::Sigmoid(tape.Leaf(theta));
    auto t = ad::SpMM(v.x, ad::ScaleRows(tape.ConstantRef(m.w1), mask));
    auto hid = ad::Relu(ad::MatMul(tape.ConstantRef(v.p), t));
    auto out = ad::MatMul(ad::MatMul(tape.ConstantRef(a_row), hid), tape.ConstantRef(m.w2));
    auto loss = ad::Add(ad::CrossEntropyRows(out, target, row0), MaskRegularizers(mask, o));
    if (!std::isfinite(loss.item())) {
      throw TrainingError("gnnexp: non-finite loss at node " + std::to_string(node), epoch);
    }
    opt.ZeroGrad();
    tape.Backward(loss);
    opt.Step();
  }
  return SigmoidOf(theta.values);
}

Vector ExplainZorroSoft(const ExplainContext& ctx, Index node, const MaskOptions& o,
                        RngStream& rng) {
  CheckNode(ctx, node);
  if (o.samples < 1) throw ContractError("zorro_soft: samples must be >= 1");
  const LocalView v = ctx.View(node);
  const GcnModel& m = ctx.model();
  const auto& w1 = ctx.w1_rows();
  const Index d = ctx.graph().num_features();
  const Index h = m.hidden();
  const Index n1 = static_cast<Index>(v.hop1.size());
  const Index n2 = static_cast<Index>(v.hop2.size());
  const Index s_count = o.samples;
  const int target = ctx.predictions()[static_cast<std::size_t>(node)];

  // Block-diagonal copies of the two aggregation steps, one block per sample.
  SparseMatrix block_p(s_count * n1, s_count * n2);
  SparseMatrix block_a(s_count, s_count * n1);
  {
    std::vector<Eigen::Triplet<double>> tp, ta;
    for (Index s = 0; s < s_count; ++s) {
      for (Index r = 0; r < n1; ++r) {
        ta.emplace_back(s, s * n1 + r, v.a(r));
        for (Index k = 0; k < n2; ++k) {
          if (v.p(r, k) != 0.0) tp.emplace_back(s * n1 + r, s * n2 + k, v.p(r, k));
        }
      }
    }
    block_p.setFromTriplets(tp.begin(), tp.end());
    block_a.setFromTriplets(ta.begin(), ta.end());
  }
  Matrix onehot = Matrix::Zero(m.num_classes(), 1);
  onehot(target, 0) = 1.0;

  Tensor<double> theta = InitMaskLogits(d, o.init_std, rng);
  RngStream noise_rng = rng.Derive(1);
  Adam<double> opt({&theta}, {.lr = o.lr});
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    // X~_s W1 = Z_s W1 + (X - Z_s) diag(m) W1, stacked over samples.
    Matrix t0 = Matrix::Zero(s_count * n2, h);
    std::vector<Eigen::Triplet<double>> diff;
    for (Index s = 0; s < s_count; ++s) {
      for (Index k = 0; k < n2; ++k) {
        for (SparseMatrix::InnerIterator it(v.x, k); it; ++it) {
          diff.emplace_back(s * n2 + k, it.col(), it.value());
        }
      }
      ctx.noise().Sample(n2, noise_rng, [&](Index k, Index f, double z) {
        t0.row(s * n2 + k) += z * w1.row(f);
        diff.emplace_back(s * n2 + k, f, -z);
      });
    }
    SparseMatrix dmat(s_count * n2, d);
    dmat.setFromTriplets(diff.begin(), diff.end());

    ad::Tape<double> tape;
    auto mask = ad::Sigmoid(tape.Leaf(theta));
    auto t = ad::Add(tape.ConstantRef(t0),
                     ad::SpMM(dmat, ad::ScaleRows(tape.ConstantRef(m.w1), mask)));
    auto hid = ad::Relu(ad::SpMM(block_p, t));
    auto out = ad::MatMul(ad::SpMM(block_a, hid), tape.ConstantRef(m.w2));
    auto agree = ad::Mean(ad::MatMul(ad::SoftmaxRows(out), tape.ConstantRef(onehot)));
    auto loss = ad::Add(ad::Scale(ad::Log(agree), -1.0), MaskRegularizers(mask, o));
    if (!std::isfinite(loss.item())) {
      throw TrainingError("zorro_soft: non-finite loss at node " + std::to_string(node),
                          epoch);
    }
    opt.ZeroGrad();
    tape.Backward(loss);
    opt.Step();
  }
  return SigmoidOf(theta.values);
}

// --- GLime ------------------------------------------------------------------------

namespace {

// Centres a symmetric m x m Gram matrix: H K H with H = I - 11^T / m.
void CenterGram(Matrix& k) {
  const Vector row_mean = k.rowwise().mean();
  const double all_mean = row_mean.mean();
  k.colwise() -= row_mean;
  k.rowwise() -= row_mean.transpose();
  k.array() += all_mean;
}

Matrix GaussianGram(const Matrix& rows) {
  const Index m = rows.rows();
  Matrix dist(m, m);
  std::vector<double> nonzero;
  for (Index a = 0; a < m; ++a) {
    dist(a, a) = 0.0;
    for (Index b = a + 1; b < m; ++b) {
      const double dd = (rows.row(a) - rows.row(b)).norm();
      dist(a, b) = dist(b, a) = dd;
      if (dd > 0.0) nonzero.push_back(dd);
    }
  }
  double sigma = Median(std::move(nonzero));
  if (!(sigma > 0.0)) sigma = 1.0;
  return (-dist.array().square() / (2.0 * sigma * sigma)).exp().matrix();
}

}  // namespace

Vector HsicLasso(const Matrix& inputs, const Matrix& outputs, double lambda,
                 double tol, int max_sweeps) {
  const Index m = inputs.rows();
  const Index d = inputs.cols();
  if (m < 2) {
    throw DegenerateNeighborhoodError("hsic_lasso: need at least 2 samples, got " +
                                      std::to_string(m));
  }
  if (outputs.rows() != m) throw DimensionError("hsic_lasso: row counts differ");
  Vector beta = Vector::Zero(d);
  Matrix l = GaussianGram(outputs);
  CenterGram(l);
  const double lnorm = l.norm();
  if (!(lnorm > 1e-12)) return beta;
  l /= lnorm;

  // Each non-constant feature contributes a unit-norm centred kernel. For a
  // 0/1 column the centred Gaussian kernel is proportional to u u^T with u
  // the centred column, so it is stored as the unit vector u.
  struct Kernel {
    bool rank1 = false;
    Vector u;
    Matrix full;
    std::vector<Index> members;
  };
  std::vector<Kernel> kernels;
  std::map<std::vector<double>, std::size_t> seen;
  for (Index f = 0; f < d; ++f) {
    const Vector col = inputs.col(f);
    if ((col.array() == col(0)).all()) continue;
    Kernel k;
    std::vector<double> key;
    if (((col.array() == 0.0) || (col.array() == 1.0)).all()) {
      k.rank1 = true;
      k.u = col.array() - col.mean();
      k.u /= k.u.norm();
      for (Index a = 0; a < m; ++a) {
        if (k.u(a) != 0.0) {
          if (k.u(a) < 0.0) k.u = -k.u;
          break;
        }
      }
      key.assign(k.u.data(), k.u.data() + m);
      key.push_back(1.0);
    } else {
      k.full = GaussianGram(col);
      CenterGram(k.full);
      const double kn = k.full.norm();
      if (!(kn > 1e-12)) continue;
      k.full /= kn;
      key.assign(k.full.data(), k.full.data() + m * m);
      key.push_back(0.0);
    }
    auto [it, fresh] = seen.emplace(std::move(key), kernels.size());
    if (fresh) {
      k.members.push_back(f);
      kernels.push_back(std::move(k));
    } else {
      kernels[it->second].members.push_back(f);
    }
  }
  const Index g = static_cast<Index>(kernels.size());
  if (g == 0) return beta;

  auto inner = [&](const Kernel& a, const Kernel& b) {
    if (a.rank1 && b.rank1) {
      const double c = a.u.dot(b.u);
      return c * c;
    }
    if (a.rank1) return a.u.dot(b.full * a.u);
    if (b.rank1) return b.u.dot(a.full * b.u);
    return (a.full.array() * b.full.array()).sum();
  };
  Vector b(g);
  Matrix gram(g, g);
  for (Index i = 0; i < g; ++i) {
    const Kernel& ki = kernels[static_cast<std::size_t>(i)];
    b(i) = ki.rank1 ? ki.u.dot(l * ki.u) : (ki.full.array() * l.array()).sum();
    gram(i, i) = inner(ki, ki);
    for (Index j = 0; j < i; ++j) {
      gram(i, j) = gram(j, i) = inner(ki, kernels[static_cast<std::size_t>(j)]);
    }
  }
  // Nonnegative coordinate descent on 1/2 |l - sum B_k K_k|^2 + lambda sum B_k.
  Vector coef = Vector::Zero(g);
  Vector q = Vector::Zero(g);  // gram * coef
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index i = 0; i < g; ++i) {
      const double rho = b(i) - (q(i) - gram(i, i) * coef(i));
      const double updated = std::max(0.0, rho - lambda) / gram(i, i);
      const double change = updated - coef(i);
      if (change != 0.0) {
        q += change * gram.col(i);
        coef(i) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    if (max_change < tol) break;
  }
  for (Index i = 0; i < g; ++i) {
    const auto& members = kernels[static_cast<std::size_t>(i)].members;
    for (Index f : members) beta(f) = coef(i) / static_cast<double>(members.size());
  }
  return beta;
}

Vector ExplainGLime(const ExplainContext& ctx, Index node, const GLimeOptions& o,
                    RngStream& rng) {
  CheckNode(ctx, node);
  const AttributedGraph& g = ctx.graph();
  std::vector<Index> local{node};
  for (SparseMatrix::InnerIterator it(g.adjacency, node); it; ++it) {
    local.push_back(it.col());
    for (SparseMatrix::InnerIterator jt(g.adjacency, it.col()); jt; ++jt) {
      local.push_back(jt.col());
    }
  }
  std::sort(local.begin(), local.end());
  local.erase(std::unique(local.begin(), local.end()), local.end());
  if (local.size() < 2) {
    throw DegenerateNeighborhoodError("glime: node " + std::to_string(node) +
                                      " has no neighbours");
  }
  if (o.max_nodes >= 2 && static_cast<Index>(local.size()) > o.max_nodes) {
    std::vector<Index> others;
    for (Index j : local) {
      if (j != node) others.push_back(j);
    }
    rng.Shuffle(others.begin(), others.end());
    others.resize(static_cast<std::size_t>(o.max_nodes - 1));
    others.push_back(node);
    std::sort(others.begin(), others.end());
    local = std::move(others);
  }
  const Index m = static_cast<Index>(local.size());
  Matrix inputs(m, g.num_features());
  Matrix outputs(m, ctx.posteriors().cols());
  for (Index k = 0; k < m; ++k) {
    inputs.row(k) = g.features.row(local[static_cast<std::size_t>(k)]);
    outputs.row(k) = ctx.posteriors().row(local[static_cast<std::size_t>(k)]);
  }
  return HsicLasso(inputs, outputs, o.lambda, o.tol, o.max_sweeps);
}

// --- Batch API -----------------------------------------------------------------------

RngStream NodeStream(const ExplainOptions& options, Index node) {
  return RngStream(options.seed, 0xE0 + static_cast<std::uint64_t>(options.explainer))
      .Derive(static_cast<std::uint64_t>(node));
}

Vector ExplainNode(const ExplainContext& ctx, Index node, const ExplainOptions& o) {
  RngStream rng = NodeStream(o, node);
  switch (o.explainer) {
    case ExplainerId::kGrad:
      return ExplainGrad(ctx, node);
    case ExplainerId::kGradI:
      return ExplainGradInput(ctx, node);
    case ExplainerId::kZorro:
      return ExplainZorro(ctx, node, o.zorro, rng).mask;
    case ExplainerId::kZorroS:
      return ExplainZorroSoft(ctx, node, o.mask, rng);
    case ExplainerId::kGnnExp:
      return ExplainGnnExp(ctx, node, o.mask, rng);
    case ExplainerId::kGLime:
      return ExplainGLime(ctx, node, o.glime, rng);
  }
  throw ContractError("unhandled explainer");
}

ExplanationSet ExplainAll(const ExplainContext& ctx, const ExplainOptions& o,
                          const std::vector<Index>& nodes,
                          const std::function<void(Index, Index)>& progress) {
  const Index n = ctx.graph().num_nodes();
  ExplanationSet e;
  e.explainer = o.explainer;
  e.kind = KindOf(o.explainer);
  e.seed = o.seed;
  e.model_hash = CheckpointHash(ctx.model());
  std::vector<Index> todo = nodes;
  if (todo.empty()) {
    todo.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) todo[static_cast<std::size_t>(i)] = i;
  }
  e.scores = Matrix::Zero(n, ctx.graph().num_features());
  Index done = 0;
  for (Index i : todo) {
    try {
      e.scores.row(i) = ExplainNode(ctx, i, o).transpose();
    } catch (const DegenerateNeighborhoodError&) {
      // Isolated nodes keep an all-zero row.
    }
    ++done;
    if (progress) progress(done, static_cast<Index>(todo.size()));
  }
  return e;
}

// --- Persistence -------------------------------------------------------------------

void WriteMatrixCsv(const Matrix& m, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError(file.string() + ": cannot write");
  std::string line;
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) line.push_back(',');
      const auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

Matrix ReadMatrixCsv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");
  std::vector<double> data;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    Index c = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      const auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw ParseError(file.string() + ":" + std::to_string(rows + 1) + ": field " +
                         std::to_string(c + 1) + ": not a number");
      }
      data.push_back(v);
      ++c;
      p = comma + 1;
    }
    if (cols >= 0 && c != cols) {
      throw ParseError(file.string() + ":" + std::to_string(rows + 1) + ": expected " +
                       std::to_string(cols) + " fields, got " + std::to_string(c));
    }
    cols = c;
    ++rows;
  }
  Matrix m(rows, std::max<Index>(cols, 0));
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = data[static_cast<std::size_t>(i * m.cols() + j)];
    }
  }
  return m;
}

json Sidecar(const ExplanationSet& e) {
  return json{{"explainer_id", ToString(e.explainer)},
              {"kind", ToString(e.kind)},
              {"seed", e.seed},
              {"model_checkpoint_hash", e.model_hash},
              {"rows", e.scores.rows()},
              {"cols", e.scores.cols()},
              {"extra", e.extra}};
}

void SaveExplanations(const ExplanationSet& e, const fs::path& stem) {
  WriteMatrixCsv(e.scores, fs::path(stem.string() + ".csv"));
  std::ofstream out(stem.string() + ".json", std::ios::binary);
  out << Sidecar(e).dump(2) << '\n';
}

ExplanationSet LoadExplanations(const fs::path& stem) {
  const fs::path jf = stem.string() + ".json";
  std::ifstream in(jf);
  if (!in) throw ParseError(jf.string() + ": cannot open");
  ExplanationSet e;
  try {
    const json j = json::parse(in);
    e.explainer = ParseExplainerId(j.at("explainer_id").get<std::string>());
    e.kind = ParseExplanationKind(j.at("kind").get<std::string>());
    e.seed = j.at("seed").get<std::uint64_t>();
    e.model_hash = j.at("model_checkpoint_hash").get<std::string>();
    if (j.contains("extra")) e.extra = j.at("extra");
    e.scores = ReadMatrixCsv(fs::path(stem.string() + ".csv"));
    if (e.scores.rows() != j.at("rows").get<Index>() ||
        e.scores.cols() != j.at("cols").get<Index>()) {
      throw ParseError(jf.string() + ": shape disagrees with csv");
    }
  } catch (const json::exception& ex) {
    throw ParseError(jf.string() + ": " + ex.what());
  }
  return e;
}

}  // namespace graphleak
