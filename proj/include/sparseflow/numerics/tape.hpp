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

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sparseflow/errors.hpp"

namespace sparseflow::numerics {

/// Dense 2-D tensor. Row-major so that the flat payload matches the
/// on-disk checkpoint layout.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

/// A named trainable tensor with its gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

  Tape<Scalar>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

/// Records a computation as it runs and replays it backwards.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// valid reverse topological order. Each node's backward closure is invoked
/// at most once.
template <typename Scalar>
class Tape {
 public:
  using MatrixT = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, const MatrixT&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(MatrixT value) { return push(std::move(value), false, nullptr); }

  Var<Scalar> leaf(MatrixT value) { return push(std::move(value), true, nullptr); }

  /// Registers a parameter as a leaf. Repeated calls for the same parameter
  /// return the same node, so its gradient is accumulated once.
  Var<Scalar> parameter(Parameter<Scalar>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<Scalar>(this, it->second);
    Var<Scalar> v = push(p.value, true, nullptr);
    nodes_[v.id()].param = &p;
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  /// Appends an op result. `backward` receives the output gradient and must
  /// route it to the inputs via accumulate(). It is dropped when no input
  /// requires a gradient.
  Var<Scalar> record(MatrixT value, std::initializer_list<Var<Scalar>> inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  Var<Scalar> record(MatrixT value, const std::vector<Var<Scalar>>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  const MatrixT& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }

  /// Gradient of the last backward() target with respect to `v`. Zero-filled
  /// when no gradient reached the node.
  MatrixT grad(const Var<Scalar>& v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id()));
    if (n.grad.size() == 0) return MatrixT::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Adds `g` into the gradient buffer of node `id` (no-op for constants).
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Mutable gradient buffer, zero-initialised on first access.
  MatrixT& grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = MatrixT::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Reverse pass from a 1x1 loss. Parameter gradients are added into
  /// Parameter::grad (which is resized to zeros first if empty).
  void backward(const Var<Scalar>& loss) {
    if (loss.tape() != this) throw ContractError("backward: variable belongs to another tape");
    const MatrixT& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss must be a scalar, got " + std::to_string(lv.rows()) + "x" +
                          std::to_string(lv.cols()));
    }
    if (backward_done_) throw ContractError("backward: tape already replayed");
    backward_done_ = true;
    if (!requires_grad(loss.id())) return;
    nodes_[static_cast<std::size_t>(loss.id())].grad = MatrixT::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr) {
        if (n.param->grad.size() == 0) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    MatrixT value;
    MatrixT grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<Scalar>* param = nullptr;
  };

  Var<Scalar> push(MatrixT value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), MatrixT{}, requires_grad, std::move(backward), nullptr});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  // deque keeps value references stable across push_back.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, int> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace sparseflow::numerics
