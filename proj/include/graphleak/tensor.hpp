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

#ifndef GRAPHLEAK_TENSOR_HPP_
#define GRAPHLEAK_TENSOR_HPP_

#include <array>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "graphleak/errors.hpp"

namespace graphleak {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using SpMat = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using SparseMatrix = SpMat<double>;
using Index = Eigen::Index;

inline std::string ShapeString(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

/// A 2-D value buffer with an optional gradient of identical shape.
///
/// Tensors are the persistent leaves of a computation: model weights,
/// learnable adjacency parameters, explanation masks. Column vectors and
/// scalars are n x 1 and 1 x 1 tensors.
template <typename Scalar>
struct Tensor {
  Mat<Scalar> values;
  bool requires_grad = false;
  Mat<Scalar> grad;

  Tensor() = default;
  explicit Tensor(Mat<Scalar> v, bool needs_grad = true)
      : values(std::move(v)), requires_grad(needs_grad) {}

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  Index size() const { return values.size(); }
  std::array<Index, 2> shape() const { return {values.rows(), values.cols()}; }

  bool has_grad() const { return grad.size() != 0; }

  void ZeroGrad() {
    if (requires_grad) grad.setZero(values.rows(), values.cols());
  }

  bool AllFinite() const {
    return values.allFinite() && (!has_grad() || grad.allFinite());
  }
};

}  // namespace graphleak

#endif  // GRAPHLEAK_TENSOR_HPP_
