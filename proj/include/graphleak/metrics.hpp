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


#ifndef GRAPHLEAK_METRICS_HPP_
#define GRAPHLEAK_METRICS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "graphleak/explain.hpp"
#include "graphleak/rng.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

/// Shannon entropy (nats) of |row| normalized to a distribution.
/// Throws MetricError when the row has no positive mass.
double SparsityEntropy(const Vector& row);

/// Soft mask used to score an explanation's faithfulness: hard masks as-is,
/// soft scores clamped to [0,1].
Vector FidelityMask(const ExplanationSet& e, Index node);

struct FidelityReport {
  Vector per_node_fidelity;
  double mean_fidelity = 0.0;
  double sparsity = 0.0;
  // Rows with no mass are left out of the sparsity mean.
  Index zero_rows = 0;
  ExplainerId explainer = ExplainerId::kGrad;
};

/// Mean RDT-fidelity and mean row entropy over `nodes` (all nodes when
/// empty). Each node draws noise from its own derived stream of `rng`.
FidelityReport DatasetFidelity(const ExplainContext& ctx, const ExplanationSet& e,
                               int samples, const RngStream& rng,
                               const std::vector<Index>& nodes = {});

/// Mean row entropy, skipping all-zero rows. Throws MetricError when every
/// row is zero.
double MeanSparsity(const Matrix& scores, Index* zero_rows = nullptr);

/// Percentage of the original's 1 bits kept in `perturbed`.
double IntersectionPct(const Matrix& original, const Matrix& perturbed);

struct QualityRow {
  std::string explainer;
  std::string dataset;
  double fidelity = 0.0;
  double sparsity = 0.0;
  // Negative when not measured.
  double intersection = -1.0;
};

/// CSV with header explainer,dataset,fidelity,sparsity,intersection; an
/// unmeasured intersection is written as an empty field. A nonempty
/// comment becomes a leading "# " line.
void WriteQualityCsv(const std::vector<QualityRow>& rows,
                     const std::filesystem::path& file,
                     const std::string& comment = {});

}  // namespace graphleak

#endif  // GRAPHLEAK_METRICS_HPP_
