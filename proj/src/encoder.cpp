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

#include "sparseflow/encoder.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "sparseflow/errors.hpp"
#include "sparseflow/graphmodel/dataset.hpp"

namespace sparseflow::encoder {

namespace nx = numerics;

namespace {

std::array<double, 4> continuous(const graphmodel::EdgeAttributes& a) {
  return {a.speed_kph, a.parsed_maxspeed, a.length_meters, a.counter_distance};
}

Index slot_of(const std::vector<std::string>& vocab, const std::string& value) {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), value);
  if (it != vocab.end() && *it == value) return static_cast<Index>(it - vocab.begin());
  return static_cast<Index>(vocab.size());  // unknown slot
}

}  // namespace

EdgeFeatureEncoder EdgeFeatureEncoder::fit(const graphmodel::RoadGraph& graph) {
  if (graph.num_edges() == 0) throw DataError("edge feature encoder needs at least one edge");
  EdgeFeatureEncoder enc;
  enc.min_ = continuous(graph.attributes().front());
  enc.max_ = enc.min_;
  std::set<std::string> importance, highway;
  for (const auto& a : graph.attributes()) {
    const auto c = continuous(a);
    for (std::size_t k = 0; k < 4; ++k) {
      enc.min_[k] = std::min(enc.min_[k], c[k]);
      enc.max_[k] = std::max(enc.max_[k], c[k]);
    }
    importance.insert(a.importance);
    highway.insert(a.highway);
  }
  enc.importance_.assign(importance.begin(), importance.end());
  enc.highway_.assign(highway.begin(), highway.end());
  return enc;
}

Index EdgeFeatureEncoder::width() const {
  return 4 + static_cast<Index>(importance_.size() + 1) + static_cast<Index>(highway_.size() + 1) + 2;
}

Mat EdgeFeatureEncoder::encode(const graphmodel::RoadGraph& graph) const {
  Mat out = Mat::Zero(graph.num_edges(), width());
  const Index imp_off = 4;
  const Index hw_off = imp_off + static_cast<Index>(importance_.size()) + 1;
  const Index ow_off = hw_off + static_cast<Index>(highway_.size()) + 1;
  for (Index i = 0; i < graph.num_edges(); ++i) {
    const auto& a = graph.attributes()[static_cast<std::size_t>(i)];
    const auto c = continuous(a);
    for (std::size_t k = 0; k < 4; ++k) {
      const double range = max_[k] - min_[k];
      out(i, static_cast<Index>(k)) = range > 0.0 ? (c[k] - min_[k]) / range : 0.0;
    }
    out(i, imp_off + slot_of(importance_, a.importance)) = 1.0;
    out(i, hw_off + slot_of(highway_, a.highway)) = 1.0;
    out(i, ow_off + (a.oneway != 0 ? 1 : 0)) = 1.0;
  }
  return out;
}

std::string EdgeFeatureEncoder::serialize() const {
  std::ostringstream os;
  os << "min";
  for (double v : min_) os << ' ' << graphmodel::format_double(v);
  os << " max";
  for (double v : max_) os << ' ' << graphmodel::format_double(v);
  os << " importance " << importance_.size();
  for (const auto& s : importance_) os << ' ' << s;
  os << " highway " << highway_.size();
  for (const auto& s : highway_) os << ' ' << s;
  return os.str();
}

EdgeFeatureEncoder EdgeFeatureEncoder::deserialize(const std::string& text) {
  std::istringstream in(text);
  EdgeFeatureEncoder enc;
  auto expect = [&](const char* word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw DataError(std::string("edge encoder state: expected '") + word + "'");
  };
  auto number = [&]() {
    std::string tok;
    double v = 0.0;
    if (!(in >> tok)) throw DataError("edge encoder state: truncated");
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw DataError("edge encoder state: bad number");
    return v;
  };
  auto words = [&](std::vector<std::string>& out) {
    std::size_t n = 0;
    if (!(in >> n)) throw DataError("edge encoder state: bad vocabulary size");
    out.resize(n);
    for (auto& w : out) {
      if (!(in >> w)) throw DataError("edge encoder state: truncated vocabulary");
    }
  };
  expect("min");
  for (auto& v : enc.min_) v = number();
  expect("max");
  for (auto& v : enc.max_) v = number();
  expect("importance");
  words(enc.importance_);
  expect("highway");
  words(enc.highway_);
  return enc;
}

Mat encode_edge_explicit(const graphmodel::RoadGraph& graph) { return EdgeFeatureEncoder::fit(graph).encode(graph); }

GatTopology make_topology(Index num_nodes, const std::vector<Index>& tails, const std::vector<Index>& heads) {
  if (tails.size() != heads.size()) throw ShapeError("make_topology: tails/heads length differ");
  GatTopology t;
  t.num_nodes = num_nodes;
  t.num_edges = static_cast<Index>(tails.size());
  t.src = tails;
  t.dst = heads;
  for (Index v = 0; v < num_nodes; ++v) {
    t.src.push_back(v);
    t.dst.push_back(v);
  }
  for (std::size_t i = 0; i < t.src.size(); ++i) {
    if (t.src[i] < 0 || t.src[i] >= num_nodes || t.dst[i] < 0 || t.dst[i] >= num_nodes) {
      throw ShapeError("make_topology: endpoint out of range");
    }
  }
  return t;
}

GatTopology make_topology(const graphmodel::RoadGraph& graph) {
  return make_topology(graph.num_nodes(), graph.tails(), graph.heads());
}

GatLayer::GatLayer(ParameterStore& store, const std::string& prefix, GatShape shape, Rng& rng) : shape_(shape) {
  if (shape_.in <= 0 || shape_.out <= 0 || shape_.heads <= 0) throw ContractError("GatLayer: invalid shape");
  for (Index k = 0; k < shape_.heads; ++k) {
    const std::string p = shape_.heads == 1 ? prefix : prefix + ".head" + std::to_string(k);
    Head h;
    h.left = Affine(store, p + ".left", shape_.in, shape_.out, rng);
    h.right = Affine(store, p + ".right", shape_.in, shape_.out, rng);
    const double bound = std::sqrt(6.0 / static_cast<double>(shape_.out));
    h.attention = &store.add(p + ".attention", nx::uniform_matrix<double>(shape_.out, 1, bound, rng));
    heads_.push_back(h);
  }
  if (shape_.edge_width > 0) edge_score_ = Affine(store, prefix + ".edge_score", shape_.edge_width, 1, rng);
}

GatLayer::Output GatLayer::forward(Tape& tape, const Var& h, const GatTopology& topo, const Var& edge_features) const {
  if (h.rows() != topo.num_nodes) throw ShapeError("gatv2: node feature rows != node count");
  if (h.cols() != shape_.in) throw ShapeError("gatv2: node feature width mismatch");

  Var bias;
  if (shape_.edge_width > 0) {
    if (!edge_features.valid() || edge_features.rows() != topo.num_edges || edge_features.cols() != shape_.edge_width) {
      throw ShapeError("gatv2: edge features must be |E| x " + std::to_string(shape_.edge_width));
    }
    Var edge_bias = edge_score_(tape, edge_features);
    bias = nx::concat_rows<double>({edge_bias, tape.constant(Mat::Zero(topo.num_nodes, 1))});
  }

  Output out;
  Var sum;
  for (const Head& head : heads_) {
    Var left = head.left(tape, h);
    Var right = head.right(tape, h);
    Var messages = nx::gather_rows(right, std::span<const Index>(topo.src));
    Var pre = nx::add(nx::gather_rows(left, std::span<const Index>(topo.dst)), messages);
    Var score = nx::matmul(nx::leaky_relu(pre, shape_.slope), tape.parameter(*head.attention));
    if (bias.valid()) score = nx::add(score, bias);
    Var alpha = nx::segment_softmax(score, std::span<const Index>(topo.dst), topo.num_nodes);
    Var agg = nx::scatter_add_rows(nx::scale_rows(messages, alpha), std::span<const Index>(topo.dst), topo.num_nodes);
    sum = sum.valid() ? nx::add(sum, agg) : agg;
    out.alpha.push_back(alpha);
  }
  out.h = heads_.size() == 1 ? sum : nx::scale(sum, 1.0 / static_cast<double>(heads_.size()));
  return out;
}

Var edge_pair_features(Tape& tape, const Var& node_features, const std::vector<Index>& tails,
                       const std::vector<Index>& heads, const Affine& projection) {
  Var pair = nx::concat_cols<double>({nx::gather_rows(node_features, std::span<const Index>(tails)),
                                      nx::gather_rows(node_features, std::span<const Index>(heads))});
  return projection(tape, pair);
}

std::pair<Var, Var> temporal_features(Tape& tape, int weekday, int slot, const Embedding& week, const Embedding& time,
                                      Index n_rows) {
  if (weekday < 0 || weekday >= week.rows()) throw DataError("weekday " + std::to_string(weekday) + " out of range");
  if (slot < 0 || slot >= time.rows()) throw DataError("slot " + std::to_string(slot) + " out of range");
  const std::vector<Index> w(static_cast<std::size_t>(n_rows), weekday);
  const std::vector<Index> t(static_cast<std::size_t>(n_rows), slot);
  return {week.lookup(tape, w), time.lookup(tape, t)};
}

SupersegmentFeatures supersegment_features(Tape& tape, const Var& u_d_plus, const Var& u_s_plus, const Var& v_e,
                                           const Var& v_i, const Mat& a_sv, const Mat& a_se, const Var& s_emb) {
  if (a_sv.cols() != u_d_plus.rows() || a_sv.cols() != u_s_plus.rows()) {
    throw ShapeError("supersegment_features: A_SV columns != node rows");
  }
  if (a_se.cols() != v_e.rows() || a_se.cols() != v_i.rows()) {
    throw ShapeError("supersegment_features: A_SE columns != edge rows");
  }
  if (a_sv.rows() != a_se.rows() || s_emb.rows() != a_sv.rows()) {
    throw ShapeError("supersegment_features: super-segment counts differ");
  }
  Var sv = tape.constant(a_sv);
  Var se = tape.constant(a_se);
  return {nx::matmul(sv, u_d_plus), nx::matmul(sv, u_s_plus), nx::matmul(se, v_e), nx::matmul(se, v_i), s_emb};
}

GraphEncoder::GraphEncoder(ParameterStore& store, const graphmodel::RoadGraph& graph, EdgeFeatureEncoder edge_encoder,
                           EncoderShape shape, Rng& rng)
    : shape_(shape), edge_encoder_(std::move(edge_encoder)) {
  const Index d = shape_.embed_dim;
  if (d <= 0) throw ContractError("GraphEncoder: embedding width must be positive");
  v_e_ = edge_encoder_.encode(graph);
  a_sv_ = graph.node_incidence();
  a_se_ = graph.edge_incidence();
  tails_ = graph.tails();
  heads_ = graph.heads();
  topology_ = make_topology(graph);

  u_s_ = Embedding(store, "encoder.node_embedding", graph.num_nodes(), d, rng);
  v_i_ = Embedding(store, "encoder.edge_embedding", graph.num_edges(), d, rng);
  u_w_ = Embedding(store, "encoder.week_embedding", graphmodel::kDaysPerWeek, d, rng);
  u_t_ = Embedding(store, "encoder.time_embedding", graphmodel::kSlotsPerDay, d, rng);
  s_emb_ = Embedding(store, "encoder.segment_embedding", std::max<Index>(graph.num_supersegments(), 1), d, rng);
  const Index ew = v_e_.cols();
  gat_dynamic_ = GatLayer(store, "encoder.gat_dynamic", {graphmodel::kBinsPerSample, d, ew, shape_.gat_heads, shape_.slope}, rng);
  gat_static_ = GatLayer(store, "encoder.gat_static", {d, d, ew, shape_.gat_heads, shape_.slope}, rng);
  f_n1_ = Affine(store, "encoder.edge_dynamic", 2 * d, d, rng);
  f_n2_ = Affine(store, "encoder.edge_static", 2 * d, d, rng);
  f_e_ = Affine(store, "encoder.edge_explicit", ew, d, rng);
}

std::pair<Var, Var> GraphEncoder::node_features(Tape& tape, const Var& u_d) const {
  Var v_e = tape.constant(v_e_);
  Var dyn = gat_dynamic_.forward(tape, u_d, topology_, v_e).h;
  Var stat = gat_static_.forward(tape, u_s_.all(tape), topology_, v_e).h;
  return {nx::ensure_finite(dyn, "encoder.gat_dynamic"), nx::ensure_finite(stat, "encoder.gat_static")};
}

void GraphEncoder::edge_features(Tape& tape, FeatureBundle& b) const {
  b.edge_dynamic = edge_pair_features(tape, b.u_d_plus, tails_, heads_, f_n1_);
  b.edge_static = edge_pair_features(tape, b.u_s_plus, tails_, heads_, f_n2_);
  b.edge_explicit = f_e_(tape, tape.constant(v_e_));
  b.v_i = v_i_.all(tape);
}

void GraphEncoder::supersegment_features(Tape& tape, FeatureBundle& b) const {
  auto f = encoder::supersegment_features(tape, b.u_d_plus, b.u_s_plus, tape.constant(v_e_), v_i_.all(tape), a_sv_,
                                          a_se_, s_emb_.all(tape));
  b.u_sd = f.u_sd;
  b.u_ss = f.u_ss;
  b.v_se = f.v_se;
  b.v_si = f.v_si;
  b.s_emb = f.s_emb;
}

std::pair<Var, Var> GraphEncoder::temporal(Tape& tape, int weekday, int slot, Index n_rows) const {
  return temporal_features(tape, weekday, slot, u_w_, u_t_, n_rows);
}

}  // namespace sparseflow::encoder
