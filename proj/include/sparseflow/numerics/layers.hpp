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

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparseflow/numerics/ops.hpp"

namespace sparseflow::numerics {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive independent stream seeds from a
/// master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Owns parameters at stable addresses, in registration order.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<Scalar>& add(std::string name, Matrix<Scalar> value) {
    for (const auto& p : params_) {
      if (p->name == name) throw ContractError("duplicate parameter name: " + name);
    }
    params_.push_back(std::make_unique<Parameter<Scalar>>(Parameter<Scalar>{std::move(name), std::move(value), {}}));
    params_.back()->zero_grad();
    return *params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  Parameter<Scalar>* find(const std::string& name) {
    for (auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
};

/// uniform(-bound, bound) fill.
template <typename Scalar>
Matrix<Scalar> uniform_matrix(Index rows, Index cols, Scalar bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

/// y = x W + b with W stored in x out. Kaiming-uniform fan-in init; bias zero.
template <typename Scalar>
class Affine {
 public:
  Affine() = default;
  Affine(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out, Rng& rng) {
    const Scalar bound = in > 0 ? std::sqrt(Scalar(6) / static_cast<Scalar>(in)) : Scalar(0);
    weight_ = &store.add(name + ".weight", uniform_matrix<Scalar>(in, out, bound, rng));
    bias_ = &store.add(name + ".bias", Matrix<Scalar>::Zero(1, out));
  }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    return add_row(matmul(x, tape.parameter(*weight_)), tape.parameter(*bias_));
  }

  Index in_width() const { return weight_->value.rows(); }
  Index out_width() const { return weight_->value.cols(); }
  Parameter<Scalar>& weight() const { return *weight_; }
  Parameter<Scalar>& bias() const { return *bias_; }

 private:
  Parameter<Scalar>* weight_ = nullptr;
  Parameter<Scalar>* bias_ = nullptr;
};

/// Lookup table of `rows` learned d-wide vectors, init uniform(-1/sqrt(d), 1/sqrt(d)).
template <typename Scalar>
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore<Scalar>& store, const std::string& name, Index rows, Index dim, Rng& rng) {
    const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));
    table_ = &store.add(name, uniform_matrix<Scalar>(rows, dim, bound, rng));
  }

  /// The whole table as one tensor.
  Var<Scalar> all(Tape<Scalar>& tape) const { return tape.parameter(*table_); }

  Var<Scalar> lookup(Tape<Scalar>& tape, std::span<const Index> rows) const {
    return gather_rows(tape.parameter(*table_), rows);
  }

  Index rows() const { return table_->value.rows(); }
  Index dim() const { return table_->value.cols(); }
  Parameter<Scalar>& table() const { return *table_; }

 private:
  Parameter<Scalar>* table_ = nullptr;
};

}  // namespace sparseflow::numerics
