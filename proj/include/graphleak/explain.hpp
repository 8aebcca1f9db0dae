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

#ifndef GRAPHLEAK_EXPLAIN_HPP_
#define GRAPHLEAK_EXPLAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphleak/gnn.hpp"
#include "graphleak/graph.hpp"
#include "graphleak/rng.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

enum class ExplainerId { kGrad, kGradI, kZorro, kZorroS, kGLime, kGnnExp };
enum class ExplanationKind { kHard, kSoft };

std::string ToString(ExplainerId id);
ExplainerId ParseExplainerId(const std::string& s);
std::string ToString(ExplanationKind kind);
ExplanationKind ParseExplanationKind(const std::string& s);
ExplanationKind KindOf(ExplainerId id);

struct ExplanationSet {
  Matrix scores;
  ExplanationKind kind = ExplanationKind::kSoft;
  ExplainerId explainer = ExplainerId::kGrad;
  std::string model_hash;
  std::uint64_t seed = 0;
  // Free-form provenance (e.g. defense parameters) kept in the sidecar.
  nlohmann::json extra = nlohmann::json::object();
};

/// Throws ValidationError when scores violate the kind's value domain.
void Validate(const ExplanationSet& e);

/// Marginal noise: every entry is redrawn from its feature's empirical
/// marginal over all nodes. Zero draws are skipped, so sampling costs are
/// proportional to the number of nonzero noise values.
class NoiseModel {
 public:
  NoiseModel() = default;
  explicit NoiseModel(const Matrix& x);

  /// Calls emit(row, feature, value) for every nonzero entry of a fresh
  /// rows x d noise matrix. Emission order is unspecified.
  template <typename Emit>
  void Sample(Index rows, RngStream& rng, Emit&& emit) const;

  Index num_features() const { return static_cast<Index>(prob_.size()); }
  double nonzero_probability(Index f) const { return prob_[static_cast<std::size_t>(f)]; }

 private:
  struct Bucket {
    double rate = 0.0;
    std::vector<Index> features;
  };
  std::vector<double> prob_;
  std::vector<std::vector<double>> values_;
  std::vector<Bucket> buckets_;
};

/// Receptive field of one node under the 2-layer model.
struct LocalView {
  Index node = 0;
  std::vector<Index> hop1;  // nonzeros of A_hat row `node`, ascending
  std::vector<Index> hop2;  // union of A_hat rows over hop1, ascending
  Eigen::RowVectorXd a;     // A_hat[node, hop1]
  Matrix p;                 // A_hat[hop1, hop2]
  SparseMatrix x;           // X[hop2, :]
  Index self_in_hop1 = 0;
  Index self_in_hop2 = 0;
};

/// Read-only state shared by all per-node explainer calls.
class ExplainContext {
 public:
  ExplainContext(const GcnModel& model, const AttributedGraph& graph);

  const GcnModel& model() const { return *model_; }
  const AttributedGraph& graph() const { return *graph_; }
  const SparseMatrix& a_hat() const { return a_hat_; }
  const Matrix& logits() const { return logits_; }
  const Matrix& posteriors() const { return posteriors_; }
  const std::vector<int>& predictions() const { return predictions_; }
  const Matrix& hidden_pre() const { return hidden_pre_; }
  const NoiseModel& noise() const { return noise_; }
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>&
  w1_rows() const {
    return w1_rows_;
  }

  LocalView View(Index node) const;

  /// Logits of the view's centre node for first-layer input t = X~ W1.
  Eigen::RowVectorXd LocalLogits(const LocalView& v, const Matrix& t) const;

 private:
  const GcnModel* model_;
  const AttributedGraph* graph_;
  SparseMatrix a_hat_;
  SparseMatrix x_sparse_;
  Matrix logits_;
  Matrix posteriors_;
  Matrix hidden_pre_;
  std::vector<int> predictions_;
  NoiseModel noise_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w1_rows_;
};

/// d logit[pred] / d x_k for every row k of the view's receptive field, in
/// hop2 order (hop2 x d). Closed form for the 2-layer ReLU GCN.
Matrix ReceptiveGradients(const ExplainContext& ctx, const LocalView& v);
/// Same matrix by reverse-mode differentiation of the local view.
Matrix ReceptiveGradientsAutodiff(const ExplainContext& ctx, const LocalView& v);

/// Gradient magnitudes of the predicted logit summed per feature over the
/// observed (nonzero) input entries of the receptive field.
Vector ExplainGrad(const ExplainContext& ctx, Index node);
Vector ExplainGradAutodiff(const ExplainContext& ctx, Index node);
Matrix ExplainGradAll(const ExplainContext& ctx);
/// Input times gradient magnitudes, summed per feature over the receptive
/// field. Equals ExplainGrad on 0/1 features.
Vector ExplainGradInput(const ExplainContext& ctx, Index node);

/// Monte-Carlo probability that the prediction of `node` is unchanged under
/// X * M + Z * (1 - M) with M the (possibly fractional) feature mask.
double RdtFidelity(const ExplainContext& ctx, Index node, const Vector& mask,
                   int samples, RngStream& rng);

struct ZorroOptions {
  double tau = 0.98;
  int samples = 100;
};

struct ZorroResult {
  Vector mask;
  std::vector<Index> order;
  std::vector<double> fidelity;  // estimate after each addition
  double initial_fidelity = 0.0;
};

/// Greedy forward selection of features until the estimated fidelity
/// reaches tau. Each step draws fresh noise shared by all candidates; ties go
/// to the lowest feature index.
ZorroResult ExplainZorro(const ExplainContext& ctx, Index node,
                         const ZorroOptions& options, RngStream& rng);

struct MaskOptions {
  int epochs = 100;
  double lr = 0.01;
  double reg_size = 0.005;
  double reg_entropy = 1.0;
  double init_std = 0.1;
  int samples = 10;  // noise draws per epoch for the relaxed fidelity
};

/// Sigmoid feature mask shared over the receptive field minimizing the
/// cross entropy of the original prediction under X * mask.
Vector ExplainGnnExp(const ExplainContext& ctx, Index node,
                     const MaskOptions& options, RngStream& rng);

/// Same parameterization; the objective is -log of the mean softmax
/// probability of the original class under marginal noise interpolation.
Vector ExplainZorroSoft(const ExplainContext& ctx, Index node,
                        const MaskOptions& options, RngStream& rng);

struct GLimeOptions {
  double lambda = 0.5;
  Index max_nodes = 64;
  double tol = 1e-6;
  int max_sweeps = 10000;
};

/// Nonnegative HSIC-Lasso of per-feature Gaussian kernels against the
/// kernel of `outputs`, rows being samples. Identical kernels share their
/// coefficient equally.
Vector HsicLasso(const Matrix& inputs, const Matrix& outputs, double lambda,
                 double tol = 1e-6, int max_sweeps = 10000);

/// HSIC-Lasso on the node's 2-hop set against target posteriors.
Vector ExplainGLime(const ExplainContext& ctx, Index node,
                    const GLimeOptions& options, RngStream& rng);

struct ExplainOptions {
  ExplainerId explainer = ExplainerId::kGrad;
  std::uint64_t seed = 0;
  ZorroOptions zorro;
  MaskOptions mask;
  GLimeOptions glime;
};

/// Per-node stream used by ExplainAll for `node`.
RngStream NodeStream(const ExplainOptions& options, Index node);

Vector ExplainNode(const ExplainContext& ctx, Index node,
                   const ExplainOptions& options);

/// Explains every node (or the listed ones; other rows stay zero).
ExplanationSet ExplainAll(const ExplainContext& ctx, const ExplainOptions& options,
                          const std::vector<Index>& nodes = {},
                          const std::function<void(Index, Index)>& progress = {});

nlohmann::json Sidecar(const ExplanationSet& e);
/// Writes <stem>.csv and <stem>.json.
void SaveExplanations(const ExplanationSet& e, const std::filesystem::path& stem);
ExplanationSet LoadExplanations(const std::filesystem::path& stem);

void WriteMatrixCsv(const Matrix& m, const std::filesystem::path& file);
Matrix ReadMatrixCsv(const std::filesystem::path& file);

// ---------------------------------------------------------------------------

template <typename Emit>
void NoiseModel::Sample(Index rows, RngStream& rng, Emit&& emit) const {
  for (const Bucket& b : buckets_) {
    const auto nb = static_cast<std::uint64_t>(b.features.size());
    const std::uint64_t cells = static_cast<std::uint64_t>(rows) * nb;
    // Candidates at the bucket's upper rate, thinned to each feature's rate.
    std::uint64_t pos = 0;
    while (pos < cells) {
      const std::uint64_t skip = rng.Geometric(b.rate);
      if (skip >= cells - pos) break;
      pos += skip;
      const Index f = b.features[pos % nb];
      const double p = prob_[static_cast<std::size_t>(f)];
      if (p < b.rate && rng.Uniform() * b.rate >= p) {
        ++pos;
        continue;
      }
      const auto& vals = values_[static_cast<std::size_t>(f)];
      const double v = vals.size() == 1 ? vals[0] : vals[rng.Below(vals.size())];
      emit(static_cast<Index>(pos / nb), f, v);
      ++pos;
    }
  }
}

}  // namespace graphleak

#endif  // GRAPHLEAK_EXPLAIN_HPP_
