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

// Shared fixtures and oracles for the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sparseflow/graphmodel/dataset.hpp"
#include "sparseflow/graphmodel/road_graph.hpp"
#include "sparseflow/numerics/layers.hpp"

namespace sparseflow::testing {

using graphmodel::Mat;
using numerics::Index;
using Tape = numerics::Tape<double>;
using Var = numerics::Var<double>;
using Store = numerics::ParameterStore<double>;

inline Mat random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

inline graphmodel::EdgeAttributes attrs(double speed, double length, const std::string& highway, int oneway) {
  graphmodel::EdgeAttributes a;
  a.speed_kph = speed;
  a.parsed_maxspeed = speed;
  a.length_meters = length;
  a.counter_distance = length / 2;
  a.importance = highway == "primary" ? "2" : "1";
  a.highway = highway;
  a.oneway = oneway;
  return a;
}

/// 6 nodes, 8 directed edges, 2 super-segments.
inline graphmodel::RoadGraph toy_graph() {
  using graphmodel::Edge;
  std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 0}, {2, 4}, {5, 0}};
  std::vector<graphmodel::EdgeAttributes> a{
      attrs(50, 120, "primary", 0),   attrs(50, 80, "primary", 1),   attrs(30, 40, "residential", 1),
      attrs(60, 200, "secondary", 1), attrs(30, 60, "residential", 1), attrs(50, 120, "primary", 0),
      attrs(60, 150, "secondary", 1), attrs(40, 90, "tertiary", 1)};
  std::vector<graphmodel::SuperSegment> ss{{{0, 1, 2}, {0, 1}}, {{2, 3, 4, 5}, {2, 3, 4}}};
  return graphmodel::RoadGraph(6, std::move(edges), std::move(a), std::move(ss));
}

/// Frame with counts in [0, 40), nodes in `missing` fully masked, random
/// labels for every edge and super-segment.
inline graphmodel::CounterFrame random_frame(const graphmodel::RoadGraph& g, std::mt19937_64& rng,
                                             const std::vector<Index>& missing) {
  Mat counts = random_matrix(g.num_nodes(), graphmodel::kBinsPerSample, rng, 0.0, 40.0);
  for (Index v : missing) counts.row(v).setConstant(std::numeric_limits<double>::quiet_NaN());
  std::uniform_int_distribution<int> cls(0, 2), wd(0, 6), slot(0, 95);
  std::uniform_real_distribution<double> sp(20.0, 60.0);
  std::vector<int> cong(static_cast<std::size_t>(g.num_edges()));
  for (int& c : cong) c = cls(rng);
  std::vector<double> speed(static_cast<std::size_t>(g.num_supersegments()));
  for (double& s : speed) s = sp(rng);
  return graphmodel::make_frame(std::move(counts), {wd(rng), slot(rng)}, std::move(cong), std::move(speed));
}

/// Relative error with a floor on the denominator, so entries where both
/// gradients are essentially zero compare on an absolute scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/// Central finite differences over every scalar of every parameter in
/// `store` (or a strided subset when `stride` > 1). `loss` must be a pure
/// function of the parameter values. `floor` bounds the denominator of the
/// relative error from below.
inline GradCheck check_parameter_gradients(Store& store, const std::function<Var(Tape&)>& loss, double eps = 1e-5,
                                           std::size_t stride = 1, double floor = 1e-6) {
  store.zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
  }
  GradCheck out;
  std::size_t counter = 0;
  for (std::size_t p = 0; p < store.size(); ++p) {
    auto& param = store[p];
    for (Index i = 0; i < param.value.size(); ++i, ++counter) {
      if (counter % stride != 0) continue;
      const double saved = param.value.data()[i];
      param.value.data()[i] = saved + eps;
      double up, down;
      {
        Tape t;
        up = loss(t).value()(0, 0);
      }
      param.value.data()[i] = saved - eps;
      {
        Tape t;
        down = loss(t).value()(0, 0);
      }
      param.value.data()[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double err = relative_error(param.grad.data()[i], numeric, floor);
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        char buf[96];
      std::snprintf(buf, sizeof buf, "] analytic %.6e numeric %.6e", param.grad.data()[i], numeric);
      out.worst = param.name + "[" + std::to_string(i) + buf;
      }
    }
  }
  return out;
}

/// Finite differences for a function of one input matrix.
inline GradCheck check_input_gradient(const Mat& x0, const std::function<Var(Tape&, const Var&)>& f,
                                      double eps = 1e-5) {
  Mat analytic;
  {
    Tape tape;
    Var x = tape.leaf(x0);
    Var l = f(tape, x);
    tape.backward(l);
    analytic = tape.grad(x);
  }
  GradCheck out;
  Mat x = x0;
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + eps;
    double up, down;
    {
      Tape t;
      up = f(t, t.leaf(x)).value()(0, 0);
    }
    x.data()[i] = saved - eps;
    {
      Tape t;
      down = f(t, t.leaf(x)).value()(0, 0);
    }
    x.data()[i] = saved;
    const double err = relative_error(analytic.data()[i], (up - down) / (2 * eps));
    ++out.checked;
    if (err > out.max_rel_error) {
      out.max_rel_error = err;
      out.worst = "x[" + std::to_string(i) + "]";
    }
  }
  return out;
}

/// Naive triple loop.
inline Mat matmul_oracle(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

/// Row s = sum of the feature rows listed as members of s.
inline Mat member_sum_oracle(const std::vector<std::vector<Index>>& members, const Mat& features) {
  Mat out = Mat::Zero(static_cast<Index>(members.size()), features.cols());
  for (std::size_t s = 0; s < members.size(); ++s) {
    for (Index j : members[s]) out.row(static_cast<Index>(s)) += features.row(j);
  }
  return out;
}

}  // namespace sparseflow::testing
