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

// Differentiable operations over Tape variables. Every function records its
// result on the tape of its first argument.

#ifndef GRAPHLEAK_OPS_HPP_
#define GRAPHLEAK_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "graphleak/rng.hpp"
#include "graphleak/tape.hpp"

namespace graphleak::ad {

namespace detail {

inline void RequireSameShape(Index ar, Index ac, Index br, Index bc,
                             const char* op) {
  if (ar != br || ac != bc) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         ShapeString(ar, ac) + " vs " + ShapeString(br, bc));
  }
}

}  // namespace detail

template <typename S>
Var<S> MatMul(Var<S> a, Var<S> b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " +
                         ShapeString(a.rows(), a.cols()) + " * " +
                         ShapeString(b.rows(), b.cols()));
  }
  Mat<S> out;
  out.noalias() = a.value() * b.value();
  return a.tape().Record(std::move(out), {a, b},
                         [a, b](Tape<S>& t, const Mat<S>& g) {
                           if (a.needs_grad())
                             t.Accumulate(a, g * b.value().transpose());
                           if (b.needs_grad())
                             t.Accumulate(b, a.value().transpose() * g);
                         });
}

/// Sparse constant times a variable. Only the dense operand is
/// differentiated.
template <typename S>
Var<S> SpMM(const SpMat<S>& s, Var<S> b) {
  if (s.cols() != b.rows()) {
    throw DimensionError("spmm: inner dimensions differ " +
                         ShapeString(s.rows(), s.cols()) + " * " +
                         ShapeString(b.rows(), b.cols()));
  }
  Mat<S> out = s * b.value();
  return b.tape().Record(std::move(out), {b},
                         [s, b](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(b, s.transpose() * g);
                         });
}

/// a + b. b may also be a 1 x cols row (broadcast over rows) or 1 x 1.
template <typename S>
Var<S> Add(Var<S> a, Var<S> b) {
  const Mat<S>& av = a.value();
  const Mat<S>& bv = b.value();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return a.tape().Record(av + bv, {a, b},
                           [a, b](Tape<S>& t, const Mat<S>& g) {
                             t.Accumulate(a, g);
                             t.Accumulate(b, g);
                           });
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    Mat<S> out = av.rowwise() + bv.row(0);
    return a.tape().Record(std::move(out), {a, b},
                           [a, b](Tape<S>& t, const Mat<S>& g) {
                             t.Accumulate(a, g);
                             if (b.needs_grad())
                               t.Accumulate(b, g.colwise().sum());
                           });
  }
  if (bv.size() == 1) {
    Mat<S> out = av.array() + bv(0, 0);
    return a.tape().Record(std::move(out), {a, b},
                           [a, b](Tape<S>& t, const Mat<S>& g) {
                             t.Accumulate(a, g);
                             if (b.needs_grad())
                               t.Accumulate(b, Mat<S>::Constant(1, 1, g.sum()));
                           });
  }
  throw DimensionError("add: incompatible shapes " +
                       ShapeString(av.rows(), av.cols()) + " + " +
                       ShapeString(bv.rows(), bv.cols()));
}

template <typename S>
Var<S> Sub(Var<S> a, Var<S> b) {
  detail::RequireSameShape(a.rows(), a.cols(), b.rows(), b.cols(), "sub");
  return a.tape().Record(a.value() - b.value(), {a, b},
                         [a, b](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, g);
                           t.Accumulate(b, -g);
                         });
}

/// Elementwise (Hadamard) product.
template <typename S>
Var<S> Mul(Var<S> a, Var<S> b) {
  detail::RequireSameShape(a.rows(), a.cols(), b.rows(), b.cols(), "mul");
  Mat<S> out = a.value().cwiseProduct(b.value());
  return a.tape().Record(std::move(out), {a, b},
                         [a, b](Tape<S>& t, const Mat<S>& g) {
                           if (a.needs_grad())
                             t.Accumulate(a, g.cwiseProduct(b.value()));
                           if (b.needs_grad())
                             t.Accumulate(b, g.cwiseProduct(a.value()));
                         });
}

/// alpha * a + beta, entrywise.
template <typename S>
Var<S> Affine(Var<S> a, S alpha, S beta = S(0)) {
  Mat<S> out = (alpha * a.value().array() + beta).matrix();
  return a.tape().Record(std::move(out), {a},
                         [a, alpha](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, alpha * g);
                         });
}

template <typename S>
Var<S> Scale(Var<S> a, S alpha) {
  return Affine(a, alpha, S(0));
}

/// diag(v) * a for a column vector v with one entry per row of a.
template <typename S>
Var<S> ScaleRows(Var<S> a, Var<S> v) {
  if (v.cols() != 1 || v.rows() != a.rows()) {
    throw DimensionError("scale_rows: need " + ShapeString(a.rows(), 1) +
                         " scale, got " + ShapeString(v.rows(), v.cols()));
  }
  Mat<S> out = v.value().col(0).asDiagonal() * a.value();
  return a.tape().Record(
      std::move(out), {a, v}, [a, v](Tape<S>& t, const Mat<S>& g) {
        if (a.needs_grad()) t.Accumulate(a, v.value().col(0).asDiagonal() * g);
        if (v.needs_grad())
          t.Accumulate(v, g.cwiseProduct(a.value()).rowwise().sum());
      });
}

template <typename S>
Var<S> Relu(Var<S> a) {
  Mat<S> out = a.value().cwiseMax(S(0));
  return a.tape().Record(std::move(out), {a},
                         [a](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, (a.value().array() > S(0))
                                               .select(g.array(), S(0))
                                               .matrix());
                         });
}

template <typename S>
Var<S> Sigmoid(Var<S> a) {
  Mat<S> out = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  const std::size_t self = a.tape().size();
  return a.tape().Record(
      std::move(out), {a}, [a, self](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& y = t.Value(Var<S>(&t, self));
        t.Accumulate(a, (g.array() * y.array() * (S(1) - y.array())).matrix());
      });
}

template <typename S>
Var<S> Log(Var<S> a) {
  if ((a.value().array() <= S(0)).any()) {
    throw DomainError("log: non-positive argument");
  }
  Mat<S> out = a.value().array().log().matrix();
  return a.tape().Record(std::move(out), {a},
                         [a](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, g.cwiseQuotient(a.value()));
                         });
}

/// Projection onto [0, 1]. The gradient passes wherever the input lies in
/// the closed interval, so parameters sitting exactly on a bound can move.
template <typename S>
Var<S> Clamp01(Var<S> a) {
  Mat<S> out = a.value().cwiseMax(S(0)).cwiseMin(S(1));
  return a.tape().Record(
      std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
        const auto& x = a.value().array();
        t.Accumulate(a, ((x >= S(0)) && (x <= S(1))).select(g.array(), S(0)).matrix());
      });
}

template <typename S>
Mat<S> SoftmaxRowsValue(const Mat<S>& x) {
  Mat<S> out = x.colwise() - x.rowwise().maxCoeff();
  out = out.array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

template <typename S>
Mat<S> LogSoftmaxRowsValue(const Mat<S>& x) {
  Mat<S> shifted = x.colwise() - x.rowwise().maxCoeff();
  const Vec<S> lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

template <typename S>
Var<S> SoftmaxRows(Var<S> a) {
  const std::size_t self = a.tape().size();
  return a.tape().Record(
      SoftmaxRowsValue(a.value()), {a},
      [a, self](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& y = t.Value(Var<S>(&t, self));
        const Vec<S> dot = g.cwiseProduct(y).rowwise().sum();
        t.Accumulate(a, (y.array() * (g.colwise() - dot).array()).matrix());
      });
}

template <typename S>
Var<S> LogSoftmaxRows(Var<S> a) {
  const std::size_t self = a.tape().size();
  return a.tape().Record(
      LogSoftmaxRowsValue(a.value()), {a},
      [a, self](Tape<S>& t, const Mat<S>& g) {
        const Mat<S> p = t.Value(Var<S>(&t, self)).array().exp().matrix();
        const Vec<S> gsum = g.rowwise().sum();
        t.Accumulate(a, g - (p.array().colwise() * gsum.array()).matrix());
      });
}

template <typename S>
Var<S> Sum(Var<S> a) {
  return a.tape().Record(Mat<S>::Constant(1, 1, a.value().sum()), {a},
                         [a](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, Mat<S>::Constant(a.rows(), a.cols(),
                                                            g(0, 0)));
                         });
}

template <typename S>
Var<S> Mean(Var<S> a) {
  const S n = static_cast<S>(a.value().size());
  return a.tape().Record(Mat<S>::Constant(1, 1, a.value().sum() / n), {a},
                         [a, n](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, Mat<S>::Constant(a.rows(), a.cols(),
                                                            g(0, 0) / n));
                         });
}

template <typename S>
Var<S> Transpose(Var<S> a) {
  return a.tape().Record(a.value().transpose(), {a},
                         [a](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, g.transpose());
                         });
}

/// Single entry (i, j) as a 1 x 1 variable.
template <typename S>
Var<S> Entry(Var<S> a, Index i, Index j) {
  return a.tape().Record(Mat<S>::Constant(1, 1, a.value()(i, j)), {a},
                         [a, i, j](Tape<S>& t, const Mat<S>& g) {
                           t.GradBuffer(a)(i, j) += g(0, 0);
                         });
}

// out += (m + m^T) / 2, tiled so both operands stay in cache.
template <typename S>
void AddSymmetricPart(const Mat<S>& m, Mat<S>& out) {
  constexpr Index kTile = 64;
  const Index n = m.rows();
  out.noalias() += S(0.5) * m;
  for (Index bj = 0; bj < n; bj += kTile) {
    const Index w = std::min(kTile, n - bj);
    for (Index bi = 0; bi < n; bi += kTile) {
      const Index h = std::min(kTile, n - bi);
      out.block(bi, bj, h, w).noalias() += S(0.5) * m.block(bj, bi, w, h).transpose();
    }
  }
}

/// (a + a^T) / 2 for a square a.
template <typename S>
Var<S> Symmetrize(Var<S> a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("symmetrize: matrix not square " +
                         ShapeString(a.rows(), a.cols()));
  }
  Mat<S> out = Mat<S>::Zero(a.rows(), a.cols());
  AddSymmetricPart(a.value(), out);
  return a.tape().Record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    AddSymmetricPart(g, t.GradBuffer(a));
  });
}

/// D^-1/2 a D^-1/2 with D the diagonal of row sums of a. Rows with a
/// non-positive sum are left zero and carry no gradient through D.
template <typename S>
Var<S> DegreeNormalize(Var<S> a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("degree_normalize: matrix not square " +
                         ShapeString(a.rows(), a.cols()));
  }
  const Vec<S> deg = a.value().rowwise().sum();
  Vec<S> s(deg.size());
  for (Index i = 0; i < deg.size(); ++i) {
    s(i) = deg(i) > S(0) ? S(1) / std::sqrt(deg(i)) : S(0);
  }
  Mat<S> out = s.asDiagonal() * a.value() * s.asDiagonal();
  const std::size_t self = a.tape().size();
  return a.tape().Record(
      std::move(out), {a},
      [a, s, deg, self](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& y = t.Value(Var<S>(&t, self));
        const Mat<S> gy = g.cwiseProduct(y);
        const Vec<S> rowdot = gy.rowwise().sum();
        const Vec<S> coldot = gy.colwise().sum().transpose();
        Vec<S> gd(deg.size());
        for (Index i = 0; i < deg.size(); ++i) {
          gd(i) = deg(i) > S(0) ? -(rowdot(i) + coldot(i)) / (S(2) * deg(i))
                                : S(0);
        }
        Mat<S>& ga = t.GradBuffer(a);
        ga.noalias() += s.asDiagonal() * g * s.asDiagonal();
        ga.colwise() += gd;
      });
}

/// Inverted dropout with a mask drawn from rng; identity when p == 0.
template <typename S>
Var<S> Dropout(Var<S> a, double p, RngStream& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ContractError("dropout: probability must be < 1");
  Mat<S> mask(a.rows(), a.cols());
  const S keep_scale = S(1) / S(1.0 - p);
  for (Index j = 0; j < mask.cols(); ++j) {
    for (Index i = 0; i < mask.rows(); ++i) {
      mask(i, j) = rng.Uniform() < p ? S(0) : keep_scale;
    }
  }
  Mat<S> out = a.value().cwiseProduct(mask);
  return a.tape().Record(std::move(out), {a},
                         [a, mask](Tape<S>& t, const Mat<S>& g) {
                           t.Accumulate(a, g.cwiseProduct(mask));
                         });
}

/// Mean negative log-likelihood of labels[r] under softmax(logits.row(r))
/// over the listed rows.
template <typename S>
Var<S> CrossEntropyRows(Var<S> logits, const std::vector<int>& labels,
                        const std::vector<Index>& rows) {
  if (rows.empty()) throw ContractError("cross_entropy: empty row set");
  const Mat<S>& z = logits.value();
  Mat<S> logp(static_cast<Index>(rows.size()), z.cols());
  S loss = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) {
      throw DomainError("cross_entropy: label out of range");
    }
    logp.row(static_cast<Index>(k)) = LogSoftmaxRowsValue<S>(z.row(r));
    loss -= logp(static_cast<Index>(k), y);
  }
  const S n = static_cast<S>(rows.size());
  return logits.tape().Record(
      Mat<S>::Constant(1, 1, loss / n), {logits},
      [logits, labels, rows, logp, n](Tape<S>& t, const Mat<S>& g) {
        Mat<S>& gz = t.GradBuffer(logits);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const Index r = rows[k];
          auto row = gz.row(r);
          row += (g(0, 0) / n) *
                 logp.row(static_cast<Index>(k)).array().exp().matrix();
          row(labels[static_cast<std::size_t>(r)]) -= g(0, 0) / n;
        }
      });
}

/// Sampled products v_k = p.row(r_k) . w.col(c_k) for index pairs (r_k, c_k);
/// returns a k x 1 column. Dense enough index sets go through the full
/// product, sparse ones through contiguous row copies.
template <typename S>
Var<S> GatherProducts(Var<S> p, Var<S> w,
                      const std::vector<std::pair<Index, Index>>& pairs) {
  if (p.cols() != w.rows()) {
    throw DimensionError("gather_products: inner dimensions differ");
  }
  using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index k_count = static_cast<Index>(pairs.size());
  const bool dense = k_count * 16 >= p.rows() * w.cols();
  const Mat<S>& pv = p.value();
  const Mat<S>& wv = w.value();
  Mat<S> out(k_count, 1);
  if (dense) {
    const Mat<S> full = pv * wv;
    for (Index k = 0; k < k_count; ++k) {
      const auto& [r, c] = pairs[static_cast<std::size_t>(k)];
      out(k, 0) = full(r, c);
    }
  } else {
    const RowMat pr = pv;
    const RowMat wt = wv.transpose();
    for (Index k = 0; k < k_count; ++k) {
      const auto& [r, c] = pairs[static_cast<std::size_t>(k)];
      out(k, 0) = pr.row(r).dot(wt.row(c));
    }
  }
  return p.tape().Record(
      std::move(out), {p, w}, [p, w, pairs, dense](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& pv2 = p.value();
        const Mat<S>& wv2 = w.value();
        if (dense) {
          Mat<S> scatter = Mat<S>::Zero(pv2.rows(), wv2.cols());
          for (std::size_t k = 0; k < pairs.size(); ++k) {
            scatter(pairs[k].first, pairs[k].second) += g(static_cast<Index>(k), 0);
          }
          if (p.needs_grad()) t.GradBuffer(p).noalias() += scatter * wv2.transpose();
          if (w.needs_grad()) t.GradBuffer(w).noalias() += pv2.transpose() * scatter;
          return;
        }
        if (p.needs_grad()) {
          const RowMat wt = wv2.transpose();
          RowMat gp = RowMat::Zero(pv2.rows(), pv2.cols());
          for (std::size_t k = 0; k < pairs.size(); ++k) {
            gp.row(pairs[k].first) += g(static_cast<Index>(k), 0) * wt.row(pairs[k].second);
          }
          t.GradBuffer(p) += gp;
        }
        if (w.needs_grad()) {
          const RowMat pr = pv2;
          RowMat gwt = RowMat::Zero(wv2.cols(), wv2.rows());
          for (std::size_t k = 0; k < pairs.size(); ++k) {
            gwt.row(pairs[k].second) += g(static_cast<Index>(k), 0) * pr.row(pairs[k].first);
          }
          t.GradBuffer(w) += gwt.transpose();
        }
      });
}

/// Mean binary cross entropy of sigmoid(logits) against 0/1 targets, computed
/// in the stable max(z,0) - z*t + log(1 + exp(-|z|)) form.
template <typename S>
Var<S> BceWithLogits(Var<S> logits, const Mat<S>& targets) {
  detail::RequireSameShape(logits.rows(), logits.cols(), targets.rows(),
                           targets.cols(), "bce");
  if (((targets.array() != S(0)) && (targets.array() != S(1))).any()) {
    throw DomainError("bce: targets must be 0/1");
  }
  const auto& z = logits.value().array();
  const S n = static_cast<S>(targets.size());
  const S loss = (z.max(S(0)) - z * targets.array() +
                  (S(1) + (-z.abs()).exp()).log())
                     .sum() /
                 n;
  return logits.tape().Record(
      Mat<S>::Constant(1, 1, loss), {logits},
      [logits, targets, n](Tape<S>& t, const Mat<S>& g) {
        const auto& zz = logits.value().array();
        const auto sig = S(1) / (S(1) + (-zz).exp());
        t.Accumulate(logits,
                     ((g(0, 0) / n) * (sig - targets.array())).matrix());
      });
}

/// Mean squared error against a constant target.
template <typename S>
Var<S> Mse(Var<S> pred, const Mat<S>& target) {
  detail::RequireSameShape(pred.rows(), pred.cols(), target.rows(),
                           target.cols(), "mse");
  const S n = static_cast<S>(target.size());
  const S loss = (pred.value() - target).squaredNorm() / n;
  return pred.tape().Record(
      Mat<S>::Constant(1, 1, loss), {pred},
      [pred, target, n](Tape<S>& t, const Mat<S>& g) {
        t.Accumulate(pred, (S(2) * g(0, 0) / n) * (pred.value() - target));
      });
}

/// Elementwise binary entropy -m log m - (1-m) log(1-m), with m clamped
/// to [eps, 1-eps].
template <typename S>
Var<S> BinaryEntropy(Var<S> m, S eps = S(1e-15)) {
  const auto x = m.value().array().max(eps).min(S(1) - eps);
  Mat<S> out = (-x * x.log() - (S(1) - x) * (S(1) - x).log()).matrix();
  return m.tape().Record(std::move(out), {m},
                         [m, eps](Tape<S>& t, const Mat<S>& g) {
                           const auto xx =
                               m.value().array().max(eps).min(S(1) - eps);
                           t.Accumulate(m, (g.array() * ((S(1) - xx) / xx).log())
                                               .matrix());
                         });
}

}  // namespace graphleak::ad

#endif  // GRAPHLEAK_OPS_HPP_
