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

#ifndef GRAPHLEAK_OPTIM_HPP_
#define GRAPHLEAK_OPTIM_HPP_

#include <cmath>
#include <utility>
#include <vector>

#include "graphleak/tensor.hpp"

namespace graphleak {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // L2 penalty added to the gradient before the moment updates.
  double weight_decay = 0.0;
};

/// Adam over a fixed set of tensors. Tensors without a gradient in a step are
/// skipped for that step.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Tensor<Scalar>*> params, AdamOptions options)
      : params_(std::move(params)), opt_(options) {
    for (auto* p : params_) {
      m_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
      v_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
    }
  }

  void ZeroGrad() {
    for (auto* p : params_) p->ZeroGrad();
  }

  void Step() {
    ++t_;
    const Scalar b1 = Scalar(opt_.beta1);
    const Scalar b2 = Scalar(opt_.beta2);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    const Scalar step = Scalar(opt_.lr) / c1;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<Scalar>& p = *params_[k];
      if (!p.has_grad()) continue;
      Mat<Scalar> g = p.grad;
      if (opt_.weight_decay != 0.0) g += Scalar(opt_.weight_decay) * p.values;
      m_[k] = b1 * m_[k] + (Scalar(1) - b1) * g;
      v_[k] = b2 * v_[k] + (Scalar(1) - b2) * g.cwiseAbs2();
      p.values.array() -= step * m_[k].array() /
                          ((v_[k].array() / c2).sqrt() + Scalar(opt_.eps));
    }
  }

  long steps() const { return t_; }
  double lr() const { return opt_.lr; }

 private:
  std::vector<Tensor<Scalar>*> params_;
  AdamOptions opt_;
  std::vector<Mat<Scalar>> m_;
  std::vector<Mat<Scalar>> v_;
  long t_ = 0;
};

}  // namespace graphleak

#endif  // GRAPHLEAK_OPTIM_HPP_
