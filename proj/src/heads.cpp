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

#include "sparseflow/heads.hpp"

#include <set>

#include "sparseflow/errors.hpp"

namespace sparseflow::heads {

namespace nx = numerics;

ClassWeights inverse_frequency_weights(std::span<const graphmodel::CounterFrame> frames) {
  std::array<double, 3> counts{0.0, 0.0, 0.0};
  for (const auto& f : frames) {
    for (int c : f.congestion) {
      if (c >= 0) counts[static_cast<std::size_t>(c)] += 1.0;
    }
  }
  ClassWeights out;
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    out.w[k] = 1.0 / std::max(counts[k], 1.0);
    total += out.w[k];
  }
  for (double& w : out.w) w *= 3.0 / total;
  return out;
}

namespace {

void push_if(std::vector<Var>& parts, const Var& v) {
  if (v.valid()) parts.push_back(v);
}

}  // namespace

Var fuse_congestion(const FeatureBundle& b) {
  std::vector<Var> parts{b.edge_dynamic, b.edge_static, b.edge_explicit, b.v_i};
  push_if(parts, b.v_w);
  push_if(parts, b.v_t);
  return nx::concat_cols(parts);
}

Var fuse_speed(const FeatureBundle& b) {
  std::vector<Var> parts{b.u_sd, b.u_ss, b.v_se, b.v_si, b.s_emb};
  push_if(parts, b.v_w);
  push_if(parts, b.v_t);
  return nx::concat_cols(parts);
}

MlpHead::MlpHead(ParameterStore& store, const std::string& prefix, Index in, Index out, HeadShape shape, Rng& rng,
                 Index side_width)
    : shape_(shape) {
  l1_ = numerics::Affine<double>(store, prefix + ".fc1", in, shape_.hidden1, rng);
  l2_ = numerics::Affine<double>(store, prefix + ".fc2", shape_.hidden1 + side_width, shape_.hidden2, rng);
  l3_ = numerics::Affine<double>(store, prefix + ".fc3", shape_.hidden2, out, rng);
}

Var MlpHead::forward(Tape& tape, const Var& x, bool training, Rng& rng, const Var& side) const {
  if (x.cols() != l1_.in_width()) {
    throw ShapeError("head: fused feature width " + std::to_string(x.cols()) + " != " +
                     std::to_string(l1_.in_width()));
  }
  Var h = nx::leaky_relu(l1_(tape, nx::dropout(x, shape_.dropout, training, rng)), shape_.slope);
  if (side.valid()) h = nx::concat_cols<double>({h, side});
  h = nx::leaky_relu(l2_(tape, nx::dropout(h, shape_.dropout, training, rng)), shape_.slope);
  return l3_(tape, nx::dropout(h, shape_.dropout, training, rng));
}

CongestionHead::CongestionHead(ParameterStore& store, Index in, HeadShape shape, Rng& rng)
    : mlp_(store, "head.congestion", in, graphmodel::kCongestionClasses, shape, rng) {}

Var CongestionHead::forward(Tape& tape, const Var& x_c, bool training, Rng& rng) const {
  return nx::ensure_finite(mlp_.forward(tape, x_c, training, rng), "head.congestion");
}

GatTopology segment_topology(const graphmodel::RoadGraph& graph) {
  const auto& segs = graph.supersegments();
  std::vector<Index> src, dst;
  for (std::size_t a = 0; a < segs.size(); ++a) {
    const std::set<Index> nodes(segs[a].nodes.begin(), segs[a].nodes.end());
    for (std::size_t b = 0; b < segs.size(); ++b) {
      if (a == b) continue;
      for (Index v : segs[b].nodes) {
        if (nodes.count(v)) {
          src.push_back(static_cast<Index>(b));
          dst.push_back(static_cast<Index>(a));
          break;
        }
      }
    }
  }
  return encoder::make_topology(static_cast<Index>(segs.size()), src, dst);
}

SpeedHead::SpeedHead(ParameterStore& store, Index in, HeadShape shape, bool segment_conv, Index conv_width,
                     const graphmodel::RoadGraph& graph, Rng& rng)
    : segment_conv_(segment_conv) {
  mlp_ = MlpHead(store, "head.speed", in, 1, shape, rng, segment_conv ? conv_width : 0);
  if (segment_conv_) {
    conv_ = encoder::GatLayer(store, "head.segment_conv", {in, conv_width, 0, 1, shape.slope}, rng);
    topology_ = segment_topology(graph);
  }
}

Var SpeedHead::forward(Tape& tape, const Var& x_s, bool training, Rng& rng) const {
  Var side;
  if (segment_conv_) side = conv_.forward(tape, x_s, topology_, Var{}).h;
  return nx::ensure_finite(mlp_.forward(tape, x_s, training, rng, side), "head.speed");
}

Var loss_weighted_ce(const Var& logits, std::span<const int> labels, const ClassWeights& weights) {
  if (logits.cols() != graphmodel::kCongestionClasses) throw ShapeError("loss_weighted_ce: logits must have 3 columns");
  if (static_cast<Index>(labels.size()) != logits.rows()) throw ShapeError("loss_weighted_ce: one label per row");
  for (double w : weights.w) {
    if (!(w > 0.0)) throw ContractError("loss_weighted_ce: class weights must be positive");
  }
  Mat pick = Mat::Zero(logits.rows(), logits.cols());
  Index labelled = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0) continue;
    if (y >= graphmodel::kCongestionClasses) throw DataError("loss_weighted_ce: label out of range");
    pick(static_cast<Index>(i), y) = weights.w[static_cast<std::size_t>(y)];
    ++labelled;
  }
  if (labelled == 0) throw DataError("loss_weighted_ce: no labelled edges");
  Var weighted = nx::hadamard_const(nx::log_softmax_rows(logits), pick);
  return nx::scale(nx::sum(weighted), -1.0 / static_cast<double>(labelled));
}

Var loss_l1(const Var& pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("loss_l1: shape mismatch");
  return nx::mean(nx::abs(nx::sub(pred, pred.tape()->constant(target))));
}

Var total_loss(const Var& reconstruction, const Var& task) { return nx::add(reconstruction, task); }

}  // namespace sparseflow::heads
