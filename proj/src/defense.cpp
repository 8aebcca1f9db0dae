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


#include "graphleak/defense.hpp"

#include <cmath>
#include <string>

namespace graphleak {

namespace {

void CheckEpsilon(double epsilon) {
  if (!(epsilon >= 0.0)) {
    throw ContractError("privacy budget must be non-negative, got " + std::to_string(epsilon));
  }
}

void Record(ExplanationSet& e, const char* mechanism, double epsilon, const RngStream& rng) {
  e.extra["defense"] = {{"mechanism", mechanism},
                        {"epsilon", std::isinf(epsilon) ? -1.0 : epsilon},
                        {"unbounded", std::isinf(epsilon)},
                        {"seed", rng.seed()},
                        {"stream_key", rng.key()}};
}

}  // namespace

PrivacyBudget::PrivacyBudget(double eps, Index dim) : epsilon(eps), d(dim) {
  if (!(eps > 0.0)) throw ContractError("privacy budget epsilon must be positive");
  if (dim < 1) throw ContractError("privacy budget dimension must be >= 1");
}

double KeepProbability(double epsilon) {
  CheckEpsilon(epsilon);
  if (epsilon >= kEpsilonCap) return 1.0;
  return 1.0 / (1.0 + std::exp(-epsilon));
}

double ReportOneProbability(double epsilon, bool bit) {
  const double keep = KeepProbability(epsilon);
  return bit ? keep : 1.0 - keep;
}

ExplanationSet PerturbHard(const ExplanationSet& e, double epsilon, const RngStream& rng) {
  if (e.kind != ExplanationKind::kHard) {
    throw ContractError("perturb_hard: explanation is soft; use the soft mechanism");
  }
  const double keep = KeepProbability(epsilon);
  ExplanationSet out = e;
  if (keep < 1.0) {
    for (Index i = 0; i < e.scores.rows(); ++i) {
      RngStream r = rng.Derive(static_cast<std::uint64_t>(i));
      for (Index j = 0; j < e.scores.cols(); ++j) {
        const double bit = e.scores(i, j);
        if (bit != 0.0 && bit != 1.0) throw ValidationError("perturb_hard: mask is not binary");
        if (r.Uniform() >= keep) out.scores(i, j) = 1.0 - bit;
      }
    }
  }
  Record(out, "randomized_response", epsilon, rng);
  return out;
}

ExplanationSet PerturbHard(const ExplanationSet& e, const PrivacyBudget& budget,
                           const RngStream& rng) {
  if (budget.d != e.scores.cols()) {
    throw DimensionError("perturb_hard: budget dimension " + std::to_string(budget.d) +
                         " differs from explanation width " +
                         std::to_string(e.scores.cols()));
  }
  return PerturbHard(e, budget.epsilon, rng);
}

ExplanationSet PerturbSoft(const ExplanationSet& e, double epsilon, const RngStream& rng) {
  if (e.kind != ExplanationKind::kSoft) {
    throw ContractError("perturb_soft: explanation is hard; use randomized response");
  }
  const double keep = KeepProbability(epsilon);
  ExplanationSet out = e;
  if (keep < 1.0) {
    for (Index i = 0; i < e.scores.rows(); ++i) {
      RngStream r = rng.Derive(static_cast<std::uint64_t>(i));
      for (Index j = 0; j < e.scores.cols(); ++j) {
        if (r.Uniform() >= keep) out.scores(i, j) = r.Normal();
      }
    }
  }
  Record(out, "gaussian_replacement", epsilon, rng);
  return out;
}

double LdpAccount(double eps_per_bit, Index d) {
  if (d < 1) throw ContractError("ldp_account: dimension must be >= 1");
  CheckEpsilon(eps_per_bit);
  return static_cast<double>(d) * eps_per_bit;
}

}  // namespace graphleak
