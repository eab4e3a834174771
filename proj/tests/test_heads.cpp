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

#include "sparseflow/errors.hpp"
#include "sparseflow/heads.hpp"
#include "support.hpp"

namespace hd = sparseflow::heads;
namespace nx = sparseflow::numerics;
using namespace sparseflow::testing;

TEST_CASE("weighted cross-entropy by hand") {
  Tape t;
  const std::vector<int> red{0};
  hd::ClassWeights w{{2.0, 1.0, 1.0}};
  CHECK(hd::loss_weighted_ce(t.constant(Mat::Zero(1, 3)), red, w).value()(0, 0) ==
        doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("unit weights reduce to plain cross-entropy") {
  std::mt19937_64 rng(1);
  const Mat logits = random_matrix(6, 3, rng, -3, 3);
  const std::vector<int> labels{0, 2, -1, 1, 1, 2};
  double ce = 0.0;
  int n = 0;
  for (Index i = 0; i < 6; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0) continue;
    const double lse = std::log(logits.row(i).array().exp().sum());
    ce += lse - logits(i, y);
    ++n;
  }
  Tape t;
  CHECK(hd::loss_weighted_ce(t.constant(logits), labels, {}).value()(0, 0) == doctest::Approx(ce / n).epsilon(1e-12));
  hd::ClassWeights twice{{2.0, 2.0, 2.0}};
  CHECK(hd::loss_weighted_ce(t.constant(logits), labels, twice).value()(0, 0) ==
        doctest::Approx(2.0 * ce / n).epsilon(1e-12));
}

TEST_CASE("cross-entropy vanishes for confident correct logits") {
  Mat logits(2, 3);
  logits << 60, 0, 0, 0, 0, 60;
  Tape t;
  const std::vector<int> labels{0, 2};
  CHECK(hd::loss_weighted_ce(t.constant(logits), labels, {}).value()(0, 0) < 1e-20);
}

TEST_CASE("cross-entropy errors") {
  Tape t;
  const std::vector<int> none{-1, -1};
  CHECK_THROWS_AS(hd::loss_weighted_ce(t.constant(Mat::Zero(2, 3)), none, {}), sparseflow::DataError);
  const std::vector<int> one{0};
  CHECK_THROWS_AS(hd::loss_weighted_ce(t.constant(Mat::Zero(2, 3)), one, {}), sparseflow::ShapeError);
}

TEST_CASE("L1 loss by hand") {
  Mat p(2, 1), y(2, 1);
  p << 1, 3;
  y << 2, 5;
  Tape t;
  CHECK(hd::loss_l1(t.constant(p), y).value()(0, 0) == doctest::Approx(1.5));
  CHECK(hd::loss_l1(t.constant(y), y).value()(0, 0) == 0.0);
  Mat a(1, 1), b(1, 1);
  a << 0.3;
  b << 0.7;
  CHECK(hd::total_loss(t.constant(a), t.constant(b)).value()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("inverse frequency weights") {
  const auto g = toy_graph();
  Mat counts = Mat::Ones(6, 4);
  std::vector<sparseflow::graphmodel::CounterFrame> frames{
      sparseflow::graphmodel::make_frame(counts, {0, 0}, {0, 2, 2, 2, 1, 1, -1, 2})};
  const auto w = hd::inverse_frequency_weights(frames);
  // counts 1, 2, 4 -> inverse 1, 1/2, 1/4 -> normalised to mean 1
  const double norm = (1.0 + 0.5 + 0.25) / 3.0;
  CHECK(w.w[0] == doctest::Approx(1.0 / norm));
  CHECK(w.w[1] == doctest::Approx(0.5 / norm));
  CHECK(w.w[2] == doctest::Approx(0.25 / norm));
}

TEST_CASE("head output shapes") {
  const auto g = toy_graph();
  hd::ParameterStore store;
  nx::Rng rng(2);
  hd::HeadShape shape{16, 8, 0.2, 0.2};
  hd::CongestionHead ch(store, 10, shape, rng);
  hd::SpeedHead sh(store, 12, shape, true, 5, g, rng);
  std::mt19937_64 data(3);
  Tape t;
  CHECK(ch.forward(t, t.constant(random_matrix(8, 10, data)), true, rng).value().cols() == 3);
  CHECK(ch.forward(t, t.constant(random_matrix(8, 10, data)), false, rng).value().rows() == 8);
  const Mat s = sh.forward(t, t.constant(random_matrix(2, 12, data)), false, rng).value();
  CHECK(s.rows() == 2);
  CHECK(s.cols() == 1);
}

TEST_CASE("zero parameters give uniform probabilities") {
  hd::ParameterStore store;
  nx::Rng rng(4);
  hd::CongestionHead ch(store, 5, {8, 4, 0.2, 0.0}, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store[i].value.setZero();
  std::mt19937_64 data(5);
  Tape t;
  const Mat p = nx::softmax_rows(ch.forward(t, t.constant(random_matrix(3, 5, data)), false, rng)).value();
  CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("segment convolution adds the expected parameters") {
  const auto g = toy_graph();
  const Index in = 12, cw = 5;
  hd::HeadShape shape{16, 8, 0.2, 0.2};
  hd::ParameterStore plain, conv;
  nx::Rng r1(6), r2(6);
  hd::SpeedHead a(plain, in, shape, false, cw, g, r1);
  hd::SpeedHead b(conv, in, shape, true, cw, g, r2);
  // GATv2: two in x cw maps with biases plus the attention vector; fc2 grows by cw rows.
  const std::size_t extra = static_cast<std::size_t>(2 * (in * cw + cw) + cw + cw * shape.hidden2);
  CHECK(conv.scalar_count() - plain.scalar_count() == extra);
}

TEST_CASE("segment topology links segments sharing a node") {
  const auto topo = hd::segment_topology(toy_graph());
  CHECK(topo.num_nodes == 2);
  CHECK(topo.num_edges == 2);
}

TEST_CASE("head gradients match finite differences") {
  const auto g = toy_graph();
  hd::ParameterStore store;
  nx::Rng rng(7);
  hd::HeadShape shape{6, 4, 0.2, 0.3};
  hd::SpeedHead sh(store, 5, shape, true, 3, g, rng);
  hd::CongestionHead ch(store, 5, shape, rng);
  std::mt19937_64 data(8);
  const Mat xs = random_matrix(2, 5, data), xc = random_matrix(8, 5, data);
  Mat target(2, 1);
  target << 0.5, -0.25;
  const std::vector<int> labels{0, 1, 2, -1, 2, 1, 0, 0};
  hd::ClassWeights w{{1.5, 1.0, 0.5}};
  auto loss = [&](Tape& t) {
    nx::Rng r(9);
    return nx::add(hd::loss_l1(sh.forward(t, t.constant(xs), true, r), target),
                   hd::loss_weighted_ce(ch.forward(t, t.constant(xc), true, r), labels, w));
  };
  CHECK(check_parameter_gradients(store, loss).max_rel_error < 1e-4);
}
