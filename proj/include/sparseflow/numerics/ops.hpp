/*
 * Copyright (c) 2026 The Sparseflow Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparseflow/numerics/tape.hpp"

// Differentiable free functions over Var. Each op computes its value eagerly
// and records a closure that maps the output gradient to its inputs.

namespace sparseflow::numerics {

namespace detail {

inline std::string dims(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a.rows(), a.cols()) + " vs " +
                     dims(b.rows(), b.cols()));
  }
}

template <typename Scalar>
Tape<Scalar>& tape_of(const Var<Scalar>& a) {
  if (!a.valid()) throw ContractError("operation on an unbound variable");
  return *a.tape();
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + detail::dims(a.rows(), a.cols()) + " * " +
                     detail::dims(b.rows(), b.cols()));
  }
  auto& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "add");
  auto& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "sub");
  auto& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {a, b}, [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
    tp.accumulate(ib, -g);
  });
}

/// a (m x n) plus a 1 x n row broadcast to every row.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                     detail::dims(row.rows(), row.cols()));
  }
  auto& t = detail::tape_of(a);
  const int ia = a.id(), ir = row.id();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row}, [ia, ir](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g);
    if (tp.requires_grad(ir)) tp.accumulate(ir, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "hadamard");
  auto& t = detail::tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [ia, ib](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                  });
}

/// s * a + c, elementwise, for scalar constants s and c.
template <typename Scalar>
Var<Scalar> affine_scalar(const Var<Scalar>& a, Scalar s, Scalar c = Scalar(0)) {
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix<Scalar> out = (a.value().array() * s + c).matrix();
  return t.record(std::move(out), {a}, [ia, s](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g * s);
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  return affine_scalar(a, s, Scalar(0));
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix<Scalar> out = a.value().transpose();
  return t.record(std::move(out), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g.transpose());
  });
}

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& a, Scalar slope) {
  if (!(slope > Scalar(0) && slope < Scalar(1))) throw ContractError("leaky_relu: slope must lie in (0,1)");
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([slope](Scalar x) { return x >= Scalar(0) ? x : slope * x; });
  return t.record(std::move(out), {a}, [ia, slope](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& x = tp.value(ia);
    Matrix<Scalar> d = x.unaryExpr([slope](Scalar v) { return v >= Scalar(0) ? Scalar(1) : slope; });
    tp.accumulate(ia, g.cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix<Scalar> out = a.value().array().exp().matrix();
  return t.record(std::move(out), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g.cwiseProduct(tp.value(ia).array().exp().matrix()));
  });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  return t.record(a.value().cwiseAbs2(), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, Scalar(2) * g.cwiseProduct(tp.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& a) {
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  return t.record(a.value().cwiseAbs(), {a}, [ia](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Matrix<Scalar> sign = tp.value(ia).unaryExpr(
        [](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); });
    tp.accumulate(ia, g.cwiseProduct(sign));
  });
}

/// Sum of all entries, as a 1x1 tensor.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [ia, r, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, Matrix<Scalar>::Constant(r, c, g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

/// Row-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax_rows_value(const Matrix<Scalar>& x) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  if (a.cols() == 0) throw ShapeError("softmax_rows: empty rows");
  auto& t = detail::tape_of(a);
  Matrix<Scalar> out = softmax_rows_value(a.value());
  const int ia = a.id();
  // The closure keeps its own copy of the probabilities.
  return t.record(out, {a}, [ia, p = out](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(p).rowwise().sum();
    Matrix<Scalar> ga = p.cwiseProduct(g - dot.replicate(1, g.cols()));
    tp.accumulate(ia, ga);
  });
}

/// Row-wise log-softmax (log-sum-exp form).
template <typename Scalar>
Var<Scalar> log_softmax_rows(const Var<Scalar>& a) {
  if (a.cols() == 0) throw ShapeError("log_softmax_rows: empty rows");
  auto& t = detail::tape_of(a);
  const Matrix<Scalar>& x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar m = x.row(i).maxCoeff();
    const Scalar lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = (x.row(i).array() - lse).matrix();
  }
  const int ia = a.id();
  return t.record(out, {a}, [ia, lp = out](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gs = g.rowwise().sum();
    Matrix<Scalar> p = lp.array().exp().matrix();
    tp.accumulate(ia, g - p.cwiseProduct(gs.replicate(1, g.cols())));
  });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<int, Index>> spans;
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    offset += p.cols();
  }
  auto& t = detail::tape_of(parts.front());
  return t.record(std::move(out), parts, [spans](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Index off = 0;
    for (const auto& [id, width] : spans) {
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleCols(off, width));
      off += width;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<int, Index>> spans;
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    offset += p.rows();
  }
  auto& t = detail::tape_of(parts.front());
  return t.record(std::move(out), parts, [spans](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Index off = 0;
    for (const auto& [id, height] : spans) {
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleRows(off, height));
      off += height;
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return t.record(std::move(out), {a}, [ia, start, count](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.grad_buffer(ia).middleCols(start, count) += g;
  });
}

/// out[i] = a[index[i]]. Repeated indices are allowed; their gradients add.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::span<const Index> index) {
  Matrix<Scalar> out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(index[i]);
  }
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  std::vector<Index> idx(index.begin(), index.end());
  return t.record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Matrix<Scalar>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

/// out[index[i]] += a[i], out has `rows` rows.
template <typename Scalar>
Var<Scalar> scatter_add_rows(const Var<Scalar>& a, std::span<const Index> index, Index rows) {
  if (static_cast<Index>(index.size()) != a.rows()) throw ShapeError("scatter_add_rows: index length != rows");
  Matrix<Scalar> out = Matrix<Scalar>::Zero(rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= rows) throw ShapeError("scatter_add_rows: index out of range");
    out.row(index[i]) += a.value().row(static_cast<Index>(i));
  }
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  std::vector<Index> idx(index.begin(), index.end());
  return t.record(std::move(out), {a}, [ia, idx = std::move(idx)](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    Matrix<Scalar>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(static_cast<Index>(i)) += g.row(idx[i]);
  });
}

/// Softmax of a column of scores within groups: entries i, j with
/// segment[i] == segment[j] share one normaliser. Every group present must be
/// nonempty by construction.
template <typename Scalar>
Var<Scalar> segment_softmax(const Var<Scalar>& scores, std::span<const Index> segment, Index groups) {
  if (scores.cols() != 1 || static_cast<Index>(segment.size()) != scores.rows()) {
    throw ShapeError("segment_softmax: expected an m x 1 score column with m segment ids");
  }
  const auto& s = scores.value();
  const Scalar lowest = std::numeric_limits<Scalar>::lowest();
  std::vector<Scalar> max(static_cast<std::size_t>(groups), lowest);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= groups) throw ShapeError("segment_softmax: segment id out of range");
    auto& m = max[static_cast<std::size_t>(segment[i])];
    m = std::max(m, s(static_cast<Index>(i), 0));
  }
  std::vector<Scalar> denom(static_cast<std::size_t>(groups), Scalar(0));
  Matrix<Scalar> out(scores.rows(), 1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    const auto k = static_cast<std::size_t>(segment[i]);
    out(static_cast<Index>(i), 0) = std::exp(s(static_cast<Index>(i), 0) - max[k]);
    denom[k] += out(static_cast<Index>(i), 0);
  }
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out(static_cast<Index>(i), 0) /= denom[static_cast<std::size_t>(segment[i])];
  }
  auto& t = detail::tape_of(scores);
  const int ia = scores.id();
  std::vector<Index> seg(segment.begin(), segment.end());
  return t.record(out, {scores},
                  [ia, seg = std::move(seg), p = out, groups](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
                    std::vector<Scalar> dot(static_cast<std::size_t>(groups), Scalar(0));
                    for (std::size_t i = 0; i < seg.size(); ++i) {
                      const auto r = static_cast<Index>(i);
                      dot[static_cast<std::size_t>(seg[i])] += g(r, 0) * p(r, 0);
                    }
                    Matrix<Scalar> ga(p.rows(), 1);
                    for (std::size_t i = 0; i < seg.size(); ++i) {
                      const auto r = static_cast<Index>(i);
                      ga(r, 0) = p(r, 0) * (g(r, 0) - dot[static_cast<std::size_t>(seg[i])]);
                    }
                    tp.accumulate(ia, ga);
                  });
}

/// Scales row i of `a` by weight(i, 0).
template <typename Scalar>
Var<Scalar> scale_rows(const Var<Scalar>& a, const Var<Scalar>& weight) {
  if (weight.cols() != 1 || weight.rows() != a.rows()) throw ShapeError("scale_rows: weight must be rows x 1");
  auto& t = detail::tape_of(a);
  const int ia = a.id(), iw = weight.id();
  Matrix<Scalar> out = a.value().array().colwise() * weight.value().col(0).array();
  return t.record(std::move(out), {a, weight}, [ia, iw](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    if (tp.requires_grad(ia)) {
      Matrix<Scalar> ga = g.array().colwise() * tp.value(iw).col(0).array();
      tp.accumulate(ia, ga);
    }
    if (tp.requires_grad(iw)) tp.accumulate(iw, g.cwiseProduct(tp.value(ia)).rowwise().sum());
  });
}

/// Elementwise product with a constant matrix.
template <typename Scalar>
Var<Scalar> hadamard_const(const Var<Scalar>& a, const Matrix<Scalar>& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("hadamard_const: shape mismatch");
  auto& t = detail::tape_of(a);
  const int ia = a.id();
  return t.record(a.value().cwiseProduct(c), {a}, [ia, c](Tape<Scalar>& tp, const Matrix<Scalar>& g) {
    tp.accumulate(ia, g.cwiseProduct(c));
  });
}

/// Inverted dropout. Returns `a` itself in eval mode or when p == 0, so the
/// output is bit-identical to the input in those cases.
template <typename Scalar, typename Rng>
Var<Scalar> dropout(const Var<Scalar>& a, Scalar p, bool training, Rng& rng) {
  if (!(p >= Scalar(0) && p < Scalar(1))) throw ContractError("dropout: p must lie in [0,1)");
  if (!training || p == Scalar(0)) return a;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Scalar survivor = Scalar(1) / (Scalar(1) - p);
  Matrix<Scalar> mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? survivor : Scalar(0);
  return hadamard_const(a, mask);
}

/// Throws NumericFault naming `where` if any entry of `a` is not finite.
template <typename Scalar>
const Var<Scalar>& ensure_finite(const Var<Scalar>& a, std::string_view where) {
  if (!a.value().allFinite()) throw NumericFault("non-finite activation in " + std::string(where));
  return a;
}

}  // namespace sparseflow::numerics
