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

#ifndef GRAPHLEAK_TAPE_HPP_
#define GRAPHLEAK_TAPE_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <utility>

#include "graphleak/tensor.hpp"

namespace graphleak::ad {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Mat<Scalar>& value() const { return tape_->Value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool needs_grad() const { return tape_->NeedsGrad(*this); }

  /// Scalar value of a 1 x 1 variable.
  Scalar item() const { return value()(0, 0); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Operations append nodes in evaluation order; Backward
/// walks them in reverse and accumulates into every requires_grad leaf.
///
/// Node gradients are released once propagated, so a second Backward on the
/// same tape starts clean while leaf tensors keep accumulating until their
/// ZeroGrad() is called.
template <typename Scalar>
class Tape {
 public:
  using MatrixT = Mat<Scalar>;
  using BackwardFn = std::function<void(Tape&, const MatrixT& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a persistent tensor without copying it. The tensor must outlive
  /// the tape.
  Var<Scalar> Leaf(Tensor<Scalar>& tensor) {
    Node& node = nodes_.emplace_back();
    node.external = &tensor.values;
    node.leaf = tensor.requires_grad ? &tensor : nullptr;
    node.needs_grad = tensor.requires_grad;
    return {this, nodes_.size() - 1};
  }

  /// Copies a value onto the tape as a constant.
  Var<Scalar> Constant(MatrixT value) {
    Node& node = nodes_.emplace_back();
    node.value = std::move(value);
    return {this, nodes_.size() - 1};
  }

  /// References an external constant without copying. The matrix must
  /// outlive the tape.
  Var<Scalar> ConstantRef(const MatrixT& value) {
    Node& node = nodes_.emplace_back();
    node.external = &value;
    return {this, nodes_.size() - 1};
  }

  /// Appends the result of an operation. The backward function receives the
  /// gradient of the loss with respect to this node only when some parent
  /// requires a gradient.
  Var<Scalar> Record(MatrixT value, std::initializer_list<Var<Scalar>> parents,
                     BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || NeedsGrad(p);
    Node& node = nodes_.emplace_back();
    node.value = std::move(value);
    node.needs_grad = needs;
    if (needs) node.backward = std::move(backward);
    return {this, nodes_.size() - 1};
  }

  const MatrixT& Value(const Var<Scalar>& v) const {
    const Node& node = nodes_[v.id()];
    return node.external != nullptr ? *node.external : node.value;
  }

  bool NeedsGrad(const Var<Scalar>& v) const {
    return nodes_[v.id()].needs_grad;
  }

  /// Adds g into the pending gradient of v (no-op when v needs none).
  template <typename Expr>
  void Accumulate(const Var<Scalar>& v, const Expr& g) {
    Node& node = nodes_[v.id()];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) {
      const MatrixT& val = node.external != nullptr ? *node.external
                                                    : node.value;
      node.grad.setZero(val.rows(), val.cols());
    }
    node.grad.noalias() += g;
  }

  /// Mutable pending gradient of v, zero-initialised on first access.
  MatrixT& GradBuffer(const Var<Scalar>& v) {
    Node& node = nodes_[v.id()];
    if (node.grad.size() == 0) {
      const MatrixT& val = node.external != nullptr ? *node.external
                                                    : node.value;
      node.grad.setZero(val.rows(), val.cols());
    }
    return node.grad;
  }

  void Backward(const Var<Scalar>& loss) {
    const MatrixT& lv = Value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward requires a scalar loss, got " +
                          ShapeString(lv.rows(), lv.cols()));
    }
    if (!NeedsGrad(loss)) return;
    Accumulate(loss, MatrixT::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.needs_grad || node.grad.size() == 0) continue;
      if (node.backward) node.backward(*this, node.grad);
      if (node.leaf != nullptr) {
        if (node.leaf->grad.size() == 0) {
          node.leaf->grad = node.grad;
        } else {
          node.leaf->grad += node.grad;
        }
      }
      node.grad.resize(0, 0);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    MatrixT value;
    const MatrixT* external = nullptr;
    MatrixT grad;
    BackwardFn backward;
    Tensor<Scalar>* leaf = nullptr;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
};

}  // namespace graphleak::ad

#endif  // GRAPHLEAK_TAPE_HPP_
