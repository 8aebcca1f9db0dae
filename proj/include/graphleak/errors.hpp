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

#ifndef GRAPHLEAK_ERRORS_HPP_
#define GRAPHLEAK_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace graphleak {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A precondition of an operation is violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file; the message carries the file, line and field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally valid input that violates a data invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimization produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Too few positive or negative candidates to build a probe set.
class EmptyProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A local explanation neighbourhood has fewer than two nodes.
class DegenerateNeighborhoodError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AUC or AP requested on single-class input.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace graphleak

#endif  // GRAPHLEAK_ERRORS_HPP_
