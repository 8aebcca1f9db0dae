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

#ifndef GRAPHLEAK_GNN_HPP_
#define GRAPHLEAK_GNN_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphleak/graph.hpp"
#include "graphleak/rng.hpp"
#include "graphleak/tensor.hpp"

namespace graphleak {

struct GcnConfig {
  Index hidden = 32;
  double dropout = 0.5;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int epochs = 200;
  std::uint64_t seed = 0;
};

/// Two-layer GCN without biases: logits = A_hat relu(A_hat X W1) W2.
struct GcnModel {
  Matrix w1;
  Matrix w2;
  GcnConfig config;
  bool trained = false;

  Index num_features() const { return w1.rows(); }
  Index hidden() const { return w1.cols(); }
  Index num_classes() const { return w2.cols(); }
};

/// Two-layer perceptron on node features alone: relu(X W1) W2.
struct MlpModel {
  Matrix w1;
  Matrix w2;
  GcnConfig config;
  bool trained = false;
};

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
SparseMatrix NormalizeAdjacency(const SparseMatrix& a);

Matrix GlorotUniform(Index fan_in, Index fan_out, RngStream& rng);

GcnModel InitGcn(Index num_features, int num_classes, const GcnConfig& config);

Matrix GcnForward(const GcnModel& m, const Matrix& x, const SparseMatrix& a_hat);
Matrix MlpForward(const MlpModel& m, const Matrix& x);

/// Full-batch Adam on the cross entropy of the listed training rows.
GcnModel TrainGcn(const Matrix& x, const SparseMatrix& a_hat,
                  const std::vector<int>& labels,
                  const std::vector<Index>& train, int num_classes,
                  const GcnConfig& config);

/// TrainGcn on g's features, normalized adjacency and train split.
GcnModel TrainTarget(const AttributedGraph& g, const GcnConfig& config);

MlpModel TrainMlp(const Matrix& x, const std::vector<int>& labels,
                  const std::vector<Index>& train, int num_classes,
                  const GcnConfig& config);

Matrix Softmax(const Matrix& logits);
Matrix Posteriors(const GcnModel& m, const Matrix& x, const SparseMatrix& a_hat);
Matrix Posteriors(const MlpModel& m, const Matrix& x);

/// Row argmax; ties go to the lowest class index.
std::vector<int> Predict(const Matrix& scores);
double Accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                const std::vector<Index>& rows);

/// Target predictions used in place of ground-truth labels.
std::vector<int> BlackBoxLabels(const GcnModel& m, const AttributedGraph& g);

nlohmann::json ToJson(const GcnModel& m);
GcnModel GcnFromJson(const nlohmann::json& j);
void SaveCheckpoint(const GcnModel& m, const std::filesystem::path& file);
GcnModel LoadCheckpoint(const std::filesystem::path& file);
/// Content hash of the serialized checkpoint.
std::string CheckpointHash(const GcnModel& m);

}  // namespace graphleak

#endif  // GRAPHLEAK_GNN_HPP_
