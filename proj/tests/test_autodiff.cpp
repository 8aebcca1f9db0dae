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


#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "graphleak/ops.hpp"
#include "graphleak/rng.hpp"
#include "graphleak/tape.hpp"

namespace graphleak {
namespace {

using Var = ad::Var<double>;
using Tape = ad::Tape<double>;
using Forward = std::function<Var(Tape&, std::vector<Var>&)>;

Matrix Uniform(Index r, Index c, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = lo + (hi - lo) * rng.Uniform();
  }
  return m;
}

// Largest relative error between reverse-mode and central-difference
// gradients over all parameters. The scalar objective is sum(f(x) .* w) for
// a fixed random w so that every output entry contributes.
double GradientError(std::vector<Tensor<double>>& params, const Forward& f,
                     std::uint64_t seed = 7) {
  Matrix w;
  const auto objective = [&](bool backward) {
    Tape tape;
    std::vector<Var> leaves;
    for (auto& p : params) leaves.push_back(tape.Leaf(p));
    Var out = f(tape, leaves);
    if (w.size() == 0) {
      RngStream r(seed);
      w = Uniform(out.rows(), out.cols(), r);
    }
    Var loss = ad::Sum(ad::Mul(out, tape.Constant(w)));
    if (backward) {
      for (auto& p : params) p.ZeroGrad();
      tape.Backward(loss);
    }
    return loss.item();
  };
  objective(true);
  std::vector<Matrix> analytic;
  for (auto& p : params) analytic.push_back(p.grad);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix numeric(params[k].rows(), params[k].cols());
    for (Index i = 0; i < params[k].size(); ++i) {
      double& x = params[k].values.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double up = objective(false);
      x = x0 - h;
      const double down = objective(false);
      x = x0;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double scale = std::max(numeric.norm(), 1e-12);
    worst = std::max(worst, (analytic[k] - numeric).norm() / scale);
  }
  return worst;
}

constexpr double kTol = 1e-5;

TEST(FiniteDifference, MatMulAndTranspose) {
  RngStream r(1);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(4, 3, r)),
                                Tensor<double>(Uniform(3, 5, r))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) {
              return ad::Transpose(ad::MatMul(v[0], v[1]));
            }),
            kTol);
}

TEST(FiniteDifference, SparseTimesDense) {
  RngStream r(2);
  SparseMatrix s(4, 3);
  s.insert(0, 1) = 0.5;
  s.insert(2, 0) = -1.5;
  s.insert(3, 2) = 2.0;
  s.insert(1, 1) = 1.0;
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(3, 2, r))};
  EXPECT_LT(GradientError(p, [&s](Tape&, std::vector<Var>& v) { return ad::SpMM(s, v[0]); }),
            kTol);
}

TEST(FiniteDifference, AddBroadcasts) {
  RngStream r(3);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(4, 3, r)),
                                Tensor<double>(Uniform(4, 3, r)),
                                Tensor<double>(Uniform(1, 3, r)),
                                Tensor<double>(Uniform(1, 1, r))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) {
              return ad::Add(ad::Add(ad::Add(v[0], v[1]), v[2]), v[3]);
            }),
            kTol);
}

TEST(FiniteDifference, ElementwiseArithmetic) {
  RngStream r(4);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(3, 3, r)),
                                Tensor<double>(Uniform(3, 3, r)),
                                Tensor<double>(Uniform(3, 1, r))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) {
              auto m = ad::Mul(ad::Sub(v[0], v[1]), v[0]);
              return ad::ScaleRows(ad::Affine(m, 1.5, -0.25), v[2]);
            }),
            kTol);
}

TEST(FiniteDifference, Activations) {
  RngStream r(5);
  // Keep entries away from the kinks of relu and clamp.
  Matrix a = Uniform(4, 4, r, -2.0, 2.0);
  for (Index i = 0; i < a.size(); ++i) {
    double& x = a.data()[i];
    if (std::abs(x) < 0.05) x += 0.1;
    if (std::abs(x - 1.0) < 0.05) x += 0.1;
  }
  std::vector<Tensor<double>> p{Tensor<double>(a)};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Relu(v[0]); }), kTol);
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Sigmoid(v[0]); }),
            kTol);
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Clamp01(v[0]); }),
            kTol);
}

TEST(FiniteDifference, LogAndBinaryEntropy) {
  RngStream r(6);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(3, 4, r, 0.1, 0.9))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Log(v[0]); }), kTol);
  EXPECT_LT(
      GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::BinaryEntropy(v[0]); }),
      kTol);
}

TEST(FiniteDifference, SoftmaxFamily) {
  RngStream r(7);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(3, 5, r, -3.0, 3.0))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::SoftmaxRows(v[0]); }),
            kTol);
  EXPECT_LT(
      GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::LogSoftmaxRows(v[0]); }),
      kTol);
  const std::vector<int> labels{4, 0, 2};
  EXPECT_LT(GradientError(p,
                          [&labels](Tape&, std::vector<Var>& v) {
                            return ad::CrossEntropyRows(v[0], labels, {0, 2});
                          }),
            kTol);
}

TEST(FiniteDifference, Reductions) {
  RngStream r(8);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(3, 4, r))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Sum(v[0]); }), kTol);
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Mean(v[0]); }), kTol);
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Entry(v[0], 2, 1); }),
            kTol);
}

TEST(FiniteDifference, SymmetrizeAndDegreeNormalize) {
  RngStream r(9);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(70, 70, r, 0.05, 1.0))};
  // 70 spans more than one tile of the blocked transpose.
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) { return ad::Symmetrize(v[0]); }),
            kTol);
  std::vector<Tensor<double>> q{Tensor<double>(Uniform(5, 5, r, 0.05, 1.0))};
  EXPECT_LT(
      GradientError(q, [](Tape&, std::vector<Var>& v) { return ad::DegreeNormalize(v[0]); }),
      kTol);
  EXPECT_LT(GradientError(q, [](Tape&, std::vector<Var>& v) {
              return ad::DegreeNormalize(ad::Symmetrize(ad::Clamp01(v[0])));
            }),
            kTol);
}

TEST(FiniteDifference, DropoutWithFixedMask) {
  RngStream r(10);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(4, 6, r))};
  EXPECT_LT(GradientError(p, [](Tape&, std::vector<Var>& v) {
              RngStream mask(42);
              return ad::Dropout(v[0], 0.5, mask);
            }),
            kTol);
}

TEST(FiniteDifference, GatherProductsBothPaths) {
  RngStream r(11);
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(4, 3, r)),
                                Tensor<double>(Uniform(3, 5, r))};
  // One pair goes through row copies, the full grid through the product.
  std::vector<std::pair<Index, Index>> few{{2, 3}};
  std::vector<std::pair<Index, Index>> all;
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 5; ++j) all.emplace_back(i, j);
  }
  all.emplace_back(1, 1);
  for (const auto* pairs : {&few, &all}) {
    EXPECT_LT(GradientError(p,
                            [pairs](Tape&, std::vector<Var>& v) {
                              return ad::GatherProducts(v[0], v[1], *pairs);
                            }),
              kTol);
  }
}

TEST(FiniteDifference, Losses) {
  RngStream r(12);
  Matrix targets(6, 1);
  targets << 1, 0, 0, 1, 1, 0;
  std::vector<Tensor<double>> p{Tensor<double>(Uniform(6, 1, r, -3.0, 3.0))};
  EXPECT_LT(GradientError(p,
                          [&targets](Tape&, std::vector<Var>& v) {
                            return ad::BceWithLogits(v[0], targets);
                          }),
            kTol);
  const Matrix y = Uniform(6, 1, r);
  EXPECT_LT(GradientError(p, [&y](Tape&, std::vector<Var>& v) { return ad::Mse(v[0], y); }),
            kTol);
}

TEST(Tape, GradientsAccumulateOverReuse) {
  Tensor<double> x(Matrix::Constant(1, 1, 3.0));
  Tape tape;
  Var v = tape.Leaf(x);
  Var y = ad::Mul(v, v);
  x.ZeroGrad();
  tape.Backward(ad::Sum(ad::Add(y, v)));
  EXPECT_DOUBLE_EQ(x.grad(0, 0), 7.0);
}

TEST(Tape, BackwardNeedsScalar) {
  Tensor<double> x(Matrix::Ones(2, 2));
  Tape tape;
  EXPECT_THROW(tape.Backward(tape.Leaf(x)), ContractError);
}

TEST(Ops, ShapeErrors) {
  Tensor<double> a(Matrix::Ones(2, 3));
  Tensor<double> b(Matrix::Ones(2, 3));
  Tape tape;
  EXPECT_THROW(ad::MatMul(tape.Leaf(a), tape.Leaf(b)), DimensionError);
  EXPECT_THROW(ad::Symmetrize(tape.Leaf(a)), DimensionError);
  Tensor<double> c(Matrix::Ones(3, 2));
  EXPECT_THROW(ad::Mul(tape.Leaf(a), tape.Leaf(c)), DimensionError);
}

TEST(Ops, BceAtZeroLogitIsLog2) {
  Tensor<double> z(Matrix::Zero(8, 1));
  Matrix t(8, 1);
  t << 1, 0, 1, 1, 0, 0, 1, 0;
  Tape tape;
  EXPECT_NEAR(ad::BceWithLogits(tape.Leaf(z), t).item(), std::log(2.0), 1e-15);
}

}  // namespace
}  // namespace graphleak
