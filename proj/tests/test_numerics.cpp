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

#include <doctest.h>

#include <cmath>
#include <random>

#include "sparseflow/errors.hpp"
#include "sparseflow/numerics/layers.hpp"
#include "support.hpp"

namespace nx = sparseflow::numerics;
using namespace sparseflow::testing;
using sparseflow::ContractError;
using sparseflow::ShapeError;

namespace {

Mat m2(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul examples") {
  Tape t;
  Mat a = m2({{1, 2}, {3, 4}});
  CHECK(nx::matmul(t.constant(Mat::Identity(2, 2)), t.constant(a)).value() == a);
  CHECK(nx::matmul(t.constant(a), t.constant(m2({{5}, {6}}))).value() == m2({{17}, {39}}));
  std::mt19937_64 rng(1);
  CHECK(nx::matmul(t.constant(Mat::Zero(2, 3)), t.constant(random_matrix(3, 4, rng))).value() == Mat::Zero(2, 4));
  CHECK_THROWS_AS(nx::matmul(t.constant(a), t.constant(Mat::Zero(3, 1))), ShapeError);
}

TEST_CASE("matmul agrees with a triple loop on random 8x8 inputs") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Tape t;
    Mat a = random_matrix(8, 8, rng), b = random_matrix(8, 8, rng);
    CHECK((nx::matmul(t.constant(a), t.constant(b)).value() - matmul_oracle(a, b)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("softmax rows examples") {
  Tape t;
  Mat p = nx::softmax_rows(t.constant(m2({{1, 1}, {0, std::log(3.0)}, {1000, 1000}}))).value();
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 0) == doctest::Approx(0.25));
  CHECK(p(1, 1) == doctest::Approx(0.75));
  CHECK(p(2, 0) == doctest::Approx(0.5));
  CHECK(p.allFinite());
  std::mt19937_64 rng(3);
  Mat q = nx::softmax_rows(t.constant(random_matrix(20, 7, rng, -30, 30))).value();
  for (Index i = 0; i < q.rows(); ++i) CHECK(std::abs(q.row(i).sum() - 1.0) <= 1e-12);
  CHECK((q.array() >= 0).all());
}

TEST_CASE("leaky relu examples") {
  Tape t;
  Mat y = nx::leaky_relu(t.constant(m2({{2, -5, 0}})), 0.2).value();
  CHECK(y(0, 0) == 2.0);
  CHECK(y(0, 1) == doctest::Approx(-1.0));
  CHECK(y(0, 2) == 0.0);
  CHECK_THROWS_AS(nx::leaky_relu(t.constant(m2({{1}})), 1.5), ContractError);
}

TEST_CASE("dropout identity cases are bit-identical") {
  std::mt19937_64 rng(4);
  nx::Rng drop_rng(5);
  Tape t;
  Var x = t.constant(random_matrix(30, 30, rng));
  CHECK(nx::dropout(x, 0.2, false, drop_rng).value() == x.value());
  CHECK(nx::dropout(x, 0.0, true, drop_rng).value() == x.value());
}

TEST_CASE("dropout keeps the expectation") {
  nx::Rng rng(6);
  Tape t;
  Mat y = nx::dropout(t.constant(Mat::Ones(100, 100)), 0.2, true, rng).value();
  CHECK(std::abs(y.mean() - 1.0) < 0.05);
  for (Index i = 0; i < y.size(); ++i) {
    const double v = y.data()[i];
    CHECK((v == 0.0 || std::abs(v - 1.25) < 1e-15));
  }
}

TEST_CASE("dropout is reproducible under a seed") {
  nx::Rng a(9), b(9);
  Tape t;
  Var x = t.constant(Mat::Ones(10, 10));
  CHECK(nx::dropout(x, 0.5, true, a).value() == nx::dropout(x, 0.5, true, b).value());
}

TEST_CASE("backward examples") {
  {
    Tape t;
    Var x = t.leaf(m2({{3}}));
    t.backward(nx::square(x));
    CHECK(t.grad(x)(0, 0) == doctest::Approx(6.0));
  }
  {
    std::mt19937_64 rng(7);
    Tape t;
    Var x = t.leaf(random_matrix(4, 5, rng));
    t.backward(nx::sum(nx::softmax_rows(x)));
    CHECK(t.grad(x).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("backward contract errors") {
  Tape t;
  Var x = t.leaf(Mat::Ones(2, 2));
  CHECK_THROWS_AS(t.backward(x), ContractError);
  Var s = nx::sum(x);
  t.backward(s);
  CHECK_THROWS_AS(t.backward(s), ContractError);
  Tape other;
  CHECK_THROWS_AS(other.backward(s), ContractError);
}

TEST_CASE("shared parameter gradients accumulate across uses") {
  nx::ParameterStore<double> store;
  auto& p = store.add("p", m2({{2}}));
  Tape t;
  Var a = t.parameter(p), b = t.parameter(p);
  CHECK(a.id() == b.id());
  t.backward(nx::hadamard(a, b));
  CHECK(p.grad(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("every differentiable op passes finite differences over 20 seeds") {
  using F = std::function<Var(Tape&, const Var&)>;
  const std::vector<std::pair<std::string, F>> ops{
      {"matmul", [](Tape& t, const Var& x) {
         std::mt19937_64 r(11);
         return nx::sum(nx::square(nx::matmul(x, t.constant(random_matrix(4, 3, r)))));
       }},
      {"add/sub", [](Tape& t, const Var& x) { return nx::sum(nx::square(nx::sub(nx::add(x, x), nx::exp(x)))); }},
      {"add_row", [](Tape& t, const Var& x) {
         return nx::sum(nx::square(nx::add_row(x, nx::slice_cols(nx::gather_rows<double>(x, std::vector<Index>{0}), 0, 4))));
       }},
      {"hadamard", [](Tape&, const Var& x) { return nx::sum(nx::hadamard(x, nx::exp(x))); }},
      {"affine_scalar", [](Tape&, const Var& x) { return nx::sum(nx::square(nx::affine_scalar(x, 3.0, -1.0))); }},
      {"transpose", [](Tape& t, const Var& x) {
         std::mt19937_64 r(12);
         return nx::sum(nx::square(nx::matmul(nx::transpose(x), t.constant(random_matrix(5, 2, r)))));
       }},
      {"leaky_relu", [](Tape&, const Var& x) { return nx::sum(nx::square(nx::leaky_relu(x, 0.2))); }},
      {"abs", [](Tape&, const Var& x) { return nx::mean(nx::abs(nx::scale(x, 2.0))); }},
      {"softmax", [](Tape& t, const Var& x) {
         std::mt19937_64 r(13);
         return nx::sum(nx::hadamard_const(nx::softmax_rows(x), random_matrix(5, 4, r)));
       }},
      {"log_softmax", [](Tape& t, const Var& x) {
         std::mt19937_64 r(14);
         return nx::sum(nx::hadamard_const(nx::log_softmax_rows(x), random_matrix(5, 4, r)));
       }},
      {"concat", [](Tape&, const Var& x) {
         return nx::sum(nx::square(nx::concat_rows<double>({nx::concat_cols<double>({x, nx::exp(x)}),
                                                            nx::concat_cols<double>({x, x})})));
       }},
      {"gather/scatter", [](Tape&, const Var& x) {
         std::vector<Index> idx{4, 0, 0, 2};
         return nx::sum(nx::square(nx::scatter_add_rows<double>(nx::gather_rows<double>(x, idx), idx, 6)));
       }},
      {"segment_softmax", [](Tape& t, const Var& x) {
         std::vector<Index> seg{0, 1, 0, 2, 1};
         std::mt19937_64 r(15);
         Var col = nx::slice_cols(x, 1, 1);
         return nx::sum(nx::hadamard_const(nx::segment_softmax<double>(col, seg, 3), random_matrix(5, 1, r)));
       }},
      {"scale_rows", [](Tape&, const Var& x) { return nx::sum(nx::square(nx::scale_rows(x, nx::slice_cols(x, 2, 1)))); }},
  };
  for (const auto& [name, f] : ops) {
    double worst = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(100 + seed));
      worst = std::max(worst, check_input_gradient(random_matrix(5, 4, rng), f).max_rel_error);
    }
    INFO(name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("two-layer perceptron gradients match finite differences") {
  nx::ParameterStore<double> store;
  nx::Rng rng(21);
  nx::Affine<double> l1(store, "l1", 5, 8, rng), l2(store, "l2", 8, 3, rng);
  std::mt19937_64 data_rng(22);
  const Mat x = random_matrix(6, 5, data_rng);
  auto loss = [&](Tape& t) {
    return nx::mean(nx::square(l2(t, nx::leaky_relu(l1(t, t.constant(x)), 0.2))));
  };
  CHECK(check_parameter_gradients(store, loss).max_rel_error < 1e-4);
}

TEST_CASE("ensure_finite names the location") {
  Tape t;
  Mat m = Mat::Zero(1, 1);
  m(0, 0) = std::nan("");
  try {
    nx::ensure_finite(t.constant(m), "layer.x");
    FAIL("expected a fault");
  } catch (const sparseflow::NumericFault& e) {
    CHECK(std::string(e.what()).find("layer.x") != std::string::npos);
  }
}

TEST_CASE("derive_seed gives distinct streams") {
  CHECK(nx::derive_seed(1, 0) != nx::derive_seed(1, 1));
  CHECK(nx::derive_seed(1, 0) != nx::derive_seed(2, 0));
  CHECK(nx::derive_seed(5, 3) == nx::derive_seed(5, 3));
}
