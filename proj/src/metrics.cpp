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


#include "graphleak/metrics.hpp"

#include <cmath>
#include <fstream>

namespace graphleak {

double SparsityEntropy(const Vector& row) {
  const double total = row.cwiseAbs().sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw MetricError("sparsity: mask has no positive mass");
  }
  double h = 0.0;
  for (Index j = 0; j < row.size(); ++j) {
    const double p = std::abs(row(j)) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

Vector FidelityMask(const ExplanationSet& e, Index node) {
  Vector m = e.scores.row(node).transpose();
  if (e.kind == ExplanationKind::kSoft) m = m.cwiseMax(0.0).cwiseMin(1.0);
  return m;
}

double MeanSparsity(const Matrix& scores, Index* zero_rows) {
  double sum = 0.0;
  Index used = 0;
  Index skipped = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    const Vector row = scores.row(i).transpose();
    if (!(row.cwiseAbs().sum() > 0.0)) {
      ++skipped;
      continue;
    }
    sum += SparsityEntropy(row);
    ++used;
  }
  if (zero_rows != nullptr) *zero_rows = skipped;
  if (used == 0) throw MetricError("sparsity: every explanation row is zero");
  return sum / static_cast<double>(used);
}

FidelityReport DatasetFidelity(const ExplainContext& ctx, const ExplanationSet& e,
                               int samples, const RngStream& rng,
                               const std::vector<Index>& nodes) {
  const Index n = ctx.graph().num_nodes();
  if (e.scores.rows() != n || e.scores.cols() != ctx.graph().num_features()) {
    throw DimensionError("dataset_fidelity: explanations " +
                         ShapeString(e.scores.rows(), e.scores.cols()) +
                         " do not cover the graph");
  }
  std::vector<Index> order = nodes;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  }
  FidelityReport report;
  report.explainer = e.explainer;
  report.per_node_fidelity = Vector::Zero(static_cast<Index>(order.size()));
  Matrix rows(static_cast<Index>(order.size()), e.scores.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Index i = order[k];
    RngStream stream = rng.Derive(static_cast<std::uint64_t>(i));
    report.per_node_fidelity(static_cast<Index>(k)) =
        RdtFidelity(ctx, i, FidelityMask(e, i), samples, stream);
    rows.row(static_cast<Index>(k)) = e.scores.row(i);
  }
  report.mean_fidelity = report.per_node_fidelity.mean();
  report.sparsity = MeanSparsity(rows, &report.zero_rows);
  return report;
}

double IntersectionPct(const Matrix& original, const Matrix& perturbed) {
  if (original.rows() != perturbed.rows() || original.cols() != perturbed.cols()) {
    throw DimensionError("intersection: " + ShapeString(original.rows(), original.cols()) +
                         " vs " + ShapeString(perturbed.rows(), perturbed.cols()));
  }
  const auto binary = [](const Matrix& m) {
    return ((m.array() == 0.0) || (m.array() == 1.0)).all();
  };
  if (!binary(original) || !binary(perturbed)) {
    throw MetricError("intersection: masks must be binary");
  }
  const double ones = original.sum();
  if (ones == 0.0) throw MetricError("intersection: original mask has no 1 bits");
  const double kept = original.cwiseProduct(perturbed).sum();
  return 100.0 * kept / ones;
}

void WriteQualityCsv(const std::vector<QualityRow>& rows,
                     const std::filesystem::path& file, const std::string& comment) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "explainer,dataset,fidelity,sparsity,intersection\n";
  for (const QualityRow& r : rows) {
    out << r.explainer << ',' << r.dataset << ',' << r.fidelity << ',' << r.sparsity << ',';
    if (r.intersection >= 0.0) out << r.intersection;
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace graphleak
