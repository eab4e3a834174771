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

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sparseflow/encoder.hpp"
#include "sparseflow/graphmodel/dataset.hpp"

namespace sparseflow::heads {

using encoder::FeatureBundle;
using encoder::GatTopology;
using graphmodel::Mat;
using numerics::Index;
using numerics::Rng;
using Tape = numerics::Tape<double>;
using Var = numerics::Var<double>;
using ParameterStore = numerics::ParameterStore<double>;

/// Loss weight per congestion class (red, yellow, green). All positive.
struct ClassWeights {
  std::array<double, 3> w{1.0, 1.0, 1.0};

  bool operator==(const ClassWeights&) const = default;
};

/// Inverse class frequency over labelled edges, normalised to mean 1.
/// Classes that never occur are counted once.
ClassWeights inverse_frequency_weights(std::span<const graphmodel::CounterFrame> frames);

/// x_c = [f_N1, f_N2, f_E(V_e), V_i, V_w, V_t]; V_w / V_t are skipped when unbound.
Var fuse_congestion(const FeatureBundle& b);

/// x_s = [U_Sd, U_Ss, V_Se, V_Si, S, V_w, V_t]; V_w / V_t are skipped when unbound.
Var fuse_speed(const FeatureBundle& b);

struct HeadShape {
  Index hidden1 = 256;
  Index hidden2 = 64;
  double slope = 0.2;
  double dropout = 0.2;  // applied to each layer's input in training; 0 disables
};

/// Three affine layers with leaky ReLU in between; raw outputs.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(ParameterStore& store, const std::string& prefix, Index in, Index out, HeadShape shape, Rng& rng,
          Index side_width = 0);

  /// `side` (optional, rows x side_width) is concatenated with the first
  /// layer's output before the remaining two layers.
  Var forward(Tape& tape, const Var& x, bool training, Rng& rng, const Var& side = Var{}) const;

  Index in_width() const { return l1_.in_width(); }

 private:
  HeadShape shape_;
  numerics::Affine<double> l1_, l2_, l3_;
};

/// f_c: |E| x 3 logits.
class CongestionHead {
 public:
  CongestionHead() = default;
  CongestionHead(ParameterStore& store, Index in, HeadShape shape, Rng& rng);
  Var forward(Tape& tape, const Var& x_c, bool training, Rng& rng) const;

 private:
  MlpHead mlp_;
};

/// Super-segment graph: segments are nodes, adjacent (both directions) iff
/// they share a road node.
GatTopology segment_topology(const graphmodel::RoadGraph& graph);

/// f_s: |S| x 1. With segment_conv the fused features also pass through one
/// GATv2 layer over segment_topology(), and its output joins the first
/// layer's output.
class SpeedHead {
 public:
  SpeedHead() = default;
  SpeedHead(ParameterStore& store, Index in, HeadShape shape, bool segment_conv, Index conv_width,
            const graphmodel::RoadGraph& graph, Rng& rng);
  Var forward(Tape& tape, const Var& x_s, bool training, Rng& rng) const;

  bool segment_conv() const { return segment_conv_; }

 private:
  bool segment_conv_ = false;
  MlpHead mlp_;
  encoder::GatLayer conv_;
  GatTopology topology_;
};

/// -(1/|E'|) sum_{i in E'} w[y_i] log softmax(logits)_i[y_i], where E' is the
/// set of edges with label >= 0. Throws DataError when E' is empty.
Var loss_weighted_ce(const Var& logits, std::span<const int> labels, const ClassWeights& weights);

/// Mean absolute error; `target` must match pred's shape.
Var loss_l1(const Var& pred, const Mat& target);

/// Unweighted sum of the reconstruction and task terms.
Var total_loss(const Var& reconstruction, const Var& task);

}  // namespace sparseflow::heads
