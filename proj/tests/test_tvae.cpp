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
#include "sparseflow/preprocess.hpp"
#include "sparseflow/tvae.hpp"
#include "support.hpp"

namespace tv = sparseflow::tvae;
namespace nx = sparseflow::numerics;
using namespace sparseflow::testing;

TEST_CASE("masked merge examples") {
  std::mt19937_64 rng(1);
  const Mat x = random_matrix(5, 4, rng), recon = random_matrix(5, 4, rng);
  CHECK(tv::masked_merge(x, Mat::Ones(5, 4), recon) == x);
  CHECK(tv::masked_merge(x, Mat::Zero(5, 4), recon) == recon);
  Mat a(1, 2), m(1, 2), r(1, 2);
  a << 5, std::nan("");
  m << 1, 0;
  r << 9, 7;
  const Mat u = tv::masked_merge(a, m, r);
  CHECK(u(0, 0) == 5.0);
  CHECK(u(0, 1) == 7.0);
}

TEST_CASE("differentiable merge routes gradients to missing cells only") {
  Mat x(1, 2), m(1, 2);
  x << 5, 0;
  m << 1, 0;
  Tape t;
  Var recon = t.leaf(Mat::Constant(1, 2, 3.0));
  Var u = tv::masked_merge(x, m, recon);
  CHECK(u.value()(0, 0) == 5.0);
  CHECK(u.value()(0, 1) == 3.0);
  t.backward(nx::sum(u));
  CHECK(t.grad(recon)(0, 0) == 0.0);
  CHECK(t.grad(recon)(0, 1) == 1.0);
}

TEST_CASE("reconstruction loss examples") {
  Tape t;
  Mat target(1, 2), mask(1, 2), r(1, 2);
  target << 1, 4;
  mask << 1, 0;
  r << 3, 100;
  CHECK(tv::loss_reconstruction(t.constant(r), target, mask).value()(0, 0) == doctest::Approx(4.0));
  mask << 1, 1;
  r << 2, 7;
  CHECK(tv::loss_reconstruction(t.constant(r), target, mask).value()(0, 0) == doctest::Approx(5.0));
  CHECK(tv::loss_reconstruction(t.constant(target), target, mask).value()(0, 0) == 0.0);
  CHECK_THROWS_AS(tv::loss_reconstruction(t.constant(r), target, Mat::Zero(1, 2)), sparseflow::DataError);
}

TEST_CASE("noise scale stays in range and is reproducible") {
  const Mat x = Mat::Constant(3, 4, 0.5);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    nx::Rng a(seed), b(seed);
    const Mat y = tv::noise_augment(x, true, a);
    CHECK(y == tv::noise_augment(x, true, b));
    const double s = y(0, 0) / 0.5;
    CHECK(s >= 0.8);
    CHECK(s <= 1.2);
    CHECK((y.array() == y(0, 0)).all());
  }
  nx::Rng rng(3);
  CHECK(tv::noise_augment(x, false, rng) == x);
  CHECK(tv::noise_augment(Mat::Zero(3, 4), true, rng) == Mat::Zero(3, 4));
}

TEST_CASE("vae shapes for both layouts") {
  for (auto layout : {tv::Layout::transposed, tv::Layout::per_node}) {
    tv::ParameterStore store;
    nx::Rng rng(4);
    tv::CounterVae vae(store, "vae", layout, 7, {0, 3, 0.2}, rng);
    std::mt19937_64 data(5);
    Tape t;
    auto out = vae.forward(t, random_matrix(7, 4, data, 0, 1), true, rng);
    CHECK(out.recon.value().rows() == 7);
    CHECK(out.recon.value().cols() == 4);
    const Index samples = layout == tv::Layout::transposed ? 4 : 7;
    CHECK(out.mu.value().rows() == samples);
    CHECK(out.mu.value().cols() == 3);
    CHECK(out.kl.value()(0, 0) >= 0.0);
  }
}

TEST_CASE("eval path is deterministic") {
  tv::ParameterStore store;
  nx::Rng init(6);
  tv::CounterVae vae(store, "vae", tv::Layout::transposed, 6, {8, 4, 0.2}, init);
  std::mt19937_64 data(7);
  const Mat x = random_matrix(6, 4, data, 0, 1);
  nx::Rng r1(1), r2(2);
  Tape t1, t2;
  CHECK(vae.forward(t1, x, false, r1).recon.value() == vae.forward(t2, x, false, r2).recon.value());
}

TEST_CASE("vae gradients match finite differences") {
  for (auto layout : {tv::Layout::transposed, tv::Layout::per_node}) {
    tv::ParameterStore store;
    nx::Rng init(8);
    tv::CounterVae vae(store, "vae", layout, 5, {6, 3, 0.2}, init);
    std::mt19937_64 data(9);
    const Mat x = random_matrix(5, 4, data, 0, 1);
    const Mat mask = (random_matrix(5, 4, data).array() > -0.3).cast<double>();
    auto loss = [&](Tape& t) {
      nx::Rng r(10);
      auto out = vae.forward(t, x, true, r);
      return nx::add(tv::loss_reconstruction(out.recon, x, mask), nx::scale(out.kl, 0.1));
    };
    CHECK(check_parameter_gradients(store, loss).max_rel_error < 1e-4);
  }
}

TEST_CASE("reconstruct keeps observed cells and fills missing ones") {
  const auto g = toy_graph();
  std::mt19937_64 data(11);
  const auto frame = random_frame(g, data, {2});
  const std::vector<sparseflow::graphmodel::CounterFrame> frames{frame};
  const auto stats = sparseflow::preprocess::fit_stats(frames);
  const Mat z = sparseflow::preprocess::normalize(frame.counts, frame.mask, stats);
  tv::ParameterStore store;
  nx::Rng rng(12);
  tv::CounterVae vae(store, "vae", tv::Layout::transposed, 6, {0, 4, 0.2}, rng);
  Tape t;
  auto out = tv::reconstruct(t, vae, z, frame.mask, stats, {false, true, false}, rng);
  const Mat& u = out.u_d.value();
  for (Index v = 0; v < 6; ++v) {
    for (Index c = 0; c < 4; ++c) {
      if (frame.mask(v, c) == 1.0) {
        CHECK(u(v, c) == z(v, c));
      } else {
        CHECK(u(v, c) == out.recon.value()(v, c));
      }
    }
  }
  CHECK(u.allFinite());
}
