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

#include "graphleak/gnn.hpp"

#include <cmath>
#include <fstream>

#include "graphleak/hash.hpp"
#include "graphleak/ops.hpp"
#include "graphleak/optim.hpp"
#include "graphleak/tape.hpp"

namespace graphleak {

using json = nlohmann::json;

SparseMatrix NormalizeAdjacency(const SparseMatrix& a) {
  const Index n = a.rows();
  Vector deg = Vector::Ones(n);
  for (Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (it.col() != i) deg(i) += it.value();
    }
  }
  const Vector s = deg.cwiseSqrt().cwiseInverse();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros() + n));
  for (Index i = 0; i < n; ++i) {
    trips.emplace_back(i, i, s(i) * s(i));
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (it.col() != i) trips.emplace_back(i, it.col(), it.value() * s(i) * s(it.col()));
    }
  }
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

Matrix GlorotUniform(Index fan_in, Index fan_out, RngStream& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Index j = 0; j < fan_out; ++j) {
    for (Index i = 0; i < fan_in; ++i) w(i, j) = limit * (2.0 * rng.Uniform() - 1.0);
  }
  return w;
}

GcnModel InitGcn(Index num_features, int num_classes, const GcnConfig& config) {
  const RngStream root(config.seed, 0x6c1);
  RngStream r1 = root.Derive(0);
  RngStream r2 = root.Derive(1);
  GcnModel m;
  m.w1 = GlorotUniform(num_features, config.hidden, r1);
  m.w2 = GlorotUniform(config.hidden, num_classes, r2);
  m.config = config;
  return m;
}

Matrix GcnForward(const GcnModel& m, const Matrix& x, const SparseMatrix& a_hat) {
  if (x.cols() != m.w1.rows() || a_hat.rows() != x.rows() ||
      a_hat.cols() != x.rows()) {
    throw DimensionError("gcn_forward: X " + ShapeString(x.rows(), x.cols()) +
                         ", A_hat " + ShapeString(a_hat.rows(), a_hat.cols()) +
                         ", W1 " + ShapeString(m.w1.rows(), m.w1.cols()));
  }
  Matrix xw = x * m.w1;
  const Matrix h = (a_hat * xw).cwiseMax(0.0);
  Matrix hw = h * m.w2;
  return a_hat * hw;
}

Matrix MlpForward(const MlpModel& m, const Matrix& x) {
  if (x.cols() != m.w1.rows()) {
    throw DimensionError("mlp_forward: X " + ShapeString(x.rows(), x.cols()) +
                         ", W1 " + ShapeString(m.w1.rows(), m.w1.cols()));
  }
  return (x * m.w1).cwiseMax(0.0) * m.w2;
}

namespace {

void CheckTrainInputs(const Matrix& x, const std::vector<int>& labels,
                      const std::vector<Index>& train) {
  if (train.empty()) throw ContractError("training split is empty");
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw DimensionError("label count differs from feature rows");
  }
}

}  // namespace

GcnModel TrainGcn(const Matrix& x, const SparseMatrix& a_hat,
                  const std::vector<int>& labels,
                  const std::vector<Index>& train, int num_classes,
                  const GcnConfig& config) {
  CheckTrainInputs(x, labels, train);
  GcnModel m = InitGcn(x.cols(), num_classes, config);
  if (config.epochs <= 0) {
    m.trained = true;
    return m;
  }
  const Matrix ax = a_hat * x;
  Tensor<double> w1(m.w1), w2(m.w2);
  Adam<double> opt({&w1, &w2}, {.lr = config.lr, .weight_decay = config.weight_decay});
  RngStream drop_rng = RngStream(config.seed, 0x6c1).Derive(2);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape<double> tape;
    auto h = ad::Relu(ad::MatMul(tape.ConstantRef(ax), tape.Leaf(w1)));
    h = ad::Dropout(h, config.dropout, drop_rng);
    auto z = ad::SpMM(a_hat, ad::MatMul(h, tape.Leaf(w2)));
    auto loss = ad::CrossEntropyRows(z, labels, train);
    if (!std::isfinite(loss.item())) {
      throw TrainingError("gcn training: non-finite loss", epoch);
    }
    opt.ZeroGrad();
    tape.Backward(loss);
    opt.Step();
  }
  m.w1 = w1.values;
  m.w2 = w2.values;
  m.trained = true;
  return m;
}

GcnModel TrainTarget(const AttributedGraph& g, const GcnConfig& config) {
  return TrainGcn(g.features, NormalizeAdjacency(g.adjacency), g.labels,
                  g.splits.train, g.num_classes, config);
}

MlpModel TrainMlp(const Matrix& x, const std::vector<int>& labels,
                  const std::vector<Index>& train, int num_classes,
                  const GcnConfig& config) {
  CheckTrainInputs(x, labels, train);
  const RngStream root(config.seed, 0x31f);
  RngStream r1 = root.Derive(0);
  RngStream r2 = root.Derive(1);
  RngStream drop_rng = root.Derive(2);
  Tensor<double> w1(GlorotUniform(x.cols(), config.hidden, r1));
  Tensor<double> w2(GlorotUniform(config.hidden, num_classes, r2));
  Adam<double> opt({&w1, &w2}, {.lr = config.lr, .weight_decay = config.weight_decay});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape<double> tape;
    auto h = ad::Relu(ad::MatMul(tape.ConstantRef(x), tape.Leaf(w1)));
    h = ad::Dropout(h, config.dropout, drop_rng);
    auto loss = ad::CrossEntropyRows(ad::MatMul(h, tape.Leaf(w2)), labels, train);
    if (!std::isfinite(loss.item())) {
      throw TrainingError("mlp training: non-finite loss", epoch);
    }
    opt.ZeroGrad();
    tape.Backward(loss);
    opt.Step();
  }
  MlpModel m;
  m.w1 = w1.values;
  m.w2 = w2.values;
  m.config = config;
  m.trained = true;
  return m;
}

Matrix Softmax(const Matrix& logits) { return ad::SoftmaxRowsValue(logits); }

Matrix Posteriors(const GcnModel& m, const Matrix& x, const SparseMatrix& a_hat) {
  return Softmax(GcnForward(m, x, a_hat));
}

Matrix Posteriors(const MlpModel& m, const Matrix& x) {
  return Softmax(MlpForward(m, x));
}

std::vector<int> Predict(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double Accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                const std::vector<Index>& rows) {
  if (rows.empty()) return 0.0;
  std::size_t hit = 0;
  for (Index r : rows) {
    hit += predicted[static_cast<std::size_t>(r)] == labels[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

std::vector<int> BlackBoxLabels(const GcnModel& m, const AttributedGraph& g) {
  return Predict(GcnForward(m, g.features, NormalizeAdjacency(g.adjacency)));
}

namespace {

json MatrixToJson(const Matrix& w) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(w.size()));
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) data.push_back(w(i, j));
  }
  return json{{"rows", w.rows()}, {"cols", w.cols()}, {"data", data}};
}

Matrix MatrixFromJson(const json& j) {
  const Index r = j.at("rows").get<Index>();
  const Index c = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != r * c) {
    throw ParseError("checkpoint: matrix data length disagrees with shape");
  }
  Matrix w(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index k = 0; k < c; ++k) w(i, k) = data[static_cast<std::size_t>(i * c + k)];
  }
  return w;
}

}  // namespace

json ToJson(const GcnModel& m) {
  const auto& c = m.config;
  return json{{"model", "gcn"},
              {"hidden", c.hidden},
              {"dropout", c.dropout},
              {"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"trained", m.trained},
              {"w1", MatrixToJson(m.w1)},
              {"w2", MatrixToJson(m.w2)}};
}

GcnModel GcnFromJson(const json& j) {
  try {
    if (j.at("model").get<std::string>() != "gcn") {
      throw ParseError("checkpoint: not a gcn model");
    }
    GcnModel m;
    m.config.hidden = j.at("hidden").get<Index>();
    m.config.dropout = j.at("dropout").get<double>();
    m.config.lr = j.at("lr").get<double>();
    m.config.weight_decay = j.at("weight_decay").get<double>();
    m.config.epochs = j.at("epochs").get<int>();
    m.config.seed = j.at("seed").get<std::uint64_t>();
    m.trained = j.at("trained").get<bool>();
    m.w1 = MatrixFromJson(j.at("w1"));
    m.w2 = MatrixFromJson(j.at("w2"));
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const GcnModel& m, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ParseError(file.string() + ": cannot write");
  out << ToJson(m).dump() << '\n';
}

GcnModel LoadCheckpoint(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string() + ": cannot open");
  try {
    return GcnFromJson(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

std::string CheckpointHash(const GcnModel& m) { return ContentHash(ToJson(m).dump()); }

}  // namespace graphleak
