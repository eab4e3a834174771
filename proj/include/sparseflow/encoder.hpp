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
#include <string>
#include <vector>

#include "sparseflow/graphmodel/road_graph.hpp"
#include "sparseflow/numerics/layers.hpp"

namespace sparseflow::encoder {

using graphmodel::Mat;
using numerics::Index;
using numerics::Rng;
using Tape = numerics::Tape<double>;
using Var = numerics::Var<double>;
using ParameterStore = numerics::ParameterStore<double>;
using Affine = numerics::Affine<double>;
using Embedding = numerics::Embedding<double>;

/// Explicit edge features: four min-max scaled continuous attributes
/// followed by one-hot importance, highway and oneway codes.
///
/// importance and highway vocabularies are fitted on a graph and carry an
/// extra trailing "unknown" slot for categories not seen at fit time. oneway
/// is boolean and always two slots wide.
class EdgeFeatureEncoder {
 public:
  EdgeFeatureEncoder() = default;

  static EdgeFeatureEncoder fit(const graphmodel::RoadGraph& graph);

  /// |E| x width() matrix.
  Mat encode(const graphmodel::RoadGraph& graph) const;

  Index width() const;

  /// Single-line text form, used inside checkpoints.
  std::string serialize() const;
  static EdgeFeatureEncoder deserialize(const std::string& text);

  bool operator==(const EdgeFeatureEncoder&) const = default;

 private:
  std::array<double, 4> min_{};
  std::array<double, 4> max_{};
  std::vector<std::string> importance_;
  std::vector<std::string> highway_;
};

/// Convenience: fit on `graph` and encode it.
Mat encode_edge_explicit(const graphmodel::RoadGraph& graph);

/// Directed message-passing topology with one self-loop per node appended
/// after the real edges: entries [0, num_edges) are graph edges, entries
/// [num_edges, num_edges + num_nodes) are the self-loops.
struct GatTopology {
  Index num_nodes = 0;
  Index num_edges = 0;
  std::vector<Index> src;
  std::vector<Index> dst;
};

GatTopology make_topology(Index num_nodes, const std::vector<Index>& tails, const std::vector<Index>& heads);
GatTopology make_topology(const graphmodel::RoadGraph& graph);

struct GatShape {
  Index in = 0;
  Index out = 0;
  Index edge_width = 0;  // 0: no edge-feature score term
  Index heads = 1;
  double slope = 0.2;
};

/// GATv2 layer with an additive edge-feature score bias.
///
/// score(u->v) = a . leaky_relu(W_l h_v + W_r h_u) + f_g(e_uv), with f_g = 0 on
/// self-loops; alpha = softmax of scores over the in-neighbourhood of v;
/// h'_v = sum_u alpha(u->v) W_r h_u. With several heads the head outputs are
/// averaged.
class GatLayer {
 public:
  GatLayer() = default;
  GatLayer(ParameterStore& store, const std::string& prefix, GatShape shape, Rng& rng);

  struct Output {
    Var h;                     // num_nodes x out
    std::vector<Var> alpha;    // per head, (num_edges + num_nodes) x 1
  };

  /// `edge_features` is |E| x edge_width, or unbound when edge_width == 0.
  Output forward(Tape& tape, const Var& h, const GatTopology& topo, const Var& edge_features) const;

  const GatShape& shape() const { return shape_; }

 private:
  struct Head {
    Affine left, right;
    numerics::Parameter<double>* attention = nullptr;  // out x 1
  };
  GatShape shape_;
  std::vector<Head> heads_;
  Affine edge_score_;
};

/// Learned and derived feature groups for one frame. Members not needed by
/// the active task stay unbound.
struct FeatureBundle {
  Var u_d_plus;     // |V| x d
  Var u_s_plus;     // |V| x d
  Var edge_dynamic; // |E| x d   f_N1([U_d+ tail, U_d+ head])
  Var edge_static;  // |E| x d   f_N2([U_s+ tail, U_s+ head])
  Var edge_explicit;// |E| x d   f_E(V_e)
  Var v_i;          // |E| x d
  Var v_w;          // rows x d
  Var v_t;          // rows x d
  Var u_sd, u_ss, v_se, v_si, s_emb;  // |S| x width
};

/// Concatenates tail and head rows per edge and applies one affine map.
Var edge_pair_features(Tape& tape, const Var& node_features, const std::vector<Index>& tails,
                       const std::vector<Index>& heads, const Affine& projection);

/// Week and time-of-day embedding rows broadcast to n_rows rows each.
/// Throws DataError for weekday outside 0..6 or slot outside 0..95.
std::pair<Var, Var> temporal_features(Tape& tape, int weekday, int slot, const Embedding& week,
                                      const Embedding& time, Index n_rows);

struct SupersegmentFeatures {
  Var u_sd, u_ss, v_se, v_si, s_emb;
};

/// A_SV . U_d+, A_SV . U_s+, A_SE . V_e, A_SE . V_i and the segment embedding.
SupersegmentFeatures supersegment_features(Tape& tape, const Var& u_d_plus, const Var& u_s_plus, const Var& v_e,
                                           const Var& v_i, const Mat& a_sv, const Mat& a_se, const Var& s_emb);

struct EncoderShape {
  Index embed_dim = 32;
  Index gat_heads = 1;
  double slope = 0.2;
};

/// All learned encoder parameters for one road graph.
class GraphEncoder {
 public:
  GraphEncoder() = default;
  GraphEncoder(ParameterStore& store, const graphmodel::RoadGraph& graph, EdgeFeatureEncoder edge_encoder,
               EncoderShape shape, Rng& rng);

  /// Dynamic (from U_d) and static (from U_s) GATv2 streams.
  std::pair<Var, Var> node_features(Tape& tape, const Var& u_d) const;

  /// Edge-level groups: f_N1, f_N2, f_E(V_e), V_i.
  void edge_features(Tape& tape, FeatureBundle& bundle) const;

  /// Super-segment-level groups.
  void supersegment_features(Tape& tape, FeatureBundle& bundle) const;

  std::pair<Var, Var> temporal(Tape& tape, int weekday, int slot, Index n_rows) const;

  const GatTopology& topology() const { return topology_; }
  const Mat& explicit_edge_features() const { return v_e_; }
  const EdgeFeatureEncoder& edge_encoder() const { return edge_encoder_; }
  const GatLayer& dynamic_gat() const { return gat_dynamic_; }
  const GatLayer& static_gat() const { return gat_static_; }
  Index embed_dim() const { return shape_.embed_dim; }

 private:
  EncoderShape shape_;
  EdgeFeatureEncoder edge_encoder_;
  Mat v_e_;
  Mat a_sv_, a_se_;
  std::vector<Index> tails_, heads_;
  GatTopology topology_;
  Embedding u_s_, v_i_, u_w_, u_t_, s_emb_;
  GatLayer gat_dynamic_, gat_static_;
  Affine f_n1_, f_n2_, f_e_;
};

}  // namespace sparseflow::encoder
