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


#ifndef GRAPHLEAK_DEFENSE_HPP_
#define GRAPHLEAK_DEFENSE_HPP_

#include "graphleak/explain.hpp"
#include "graphleak/rng.hpp"

namespace graphleak {

/// Per-bit budgets at or above this are treated as no perturbation.
inline constexpr double kEpsilonCap = 50.0;

struct PrivacyBudget {
  double epsilon = 1.0;
  Index d = 1;

  PrivacyBudget(double eps, Index dim);
  double total() const { return static_cast<double>(d) * epsilon; }
};

/// Probability that randomized response reports the true bit,
/// e^eps / (e^eps + 1). Exactly 1 at or beyond the cap.
double KeepProbability(double epsilon);

/// Pr[out = 1 | in = bit].
double ReportOneProbability(double epsilon, bool bit);

/// Flips each bit of a hard explanation independently; row i uses
/// rng.Derive(i). Throws ContractError for soft input.
ExplanationSet PerturbHard(const ExplanationSet& e, double epsilon, const RngStream& rng);
ExplanationSet PerturbHard(const ExplanationSet& e, const PrivacyBudget& budget,
                           const RngStream& rng);

/// Keeps each soft entry with KeepProbability(epsilon), otherwise replaces it
/// by a standard normal draw. Throws ContractError for hard input.
ExplanationSet PerturbSoft(const ExplanationSet& e, double epsilon, const RngStream& rng);

/// Total local-DP budget d * eps of a d-bit explanation.
double LdpAccount(double eps_per_bit, Index d);

}  // namespace graphleak

#endif  // GRAPHLEAK_DEFENSE_HPP_
