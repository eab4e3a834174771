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

#include "sparseflow/model.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "sparseflow/errors.hpp"
#include "sparseflow/preprocess.hpp"

namespace sparseflow::model {

namespace nx = numerics;
using graphmodel::format_double;

std::string to_string(Task task) { return task == Task::congestion ? "congestion" : "speed"; }

Task parse_task(const std::string& text) {
  if (text == "congestion") return Task::congestion;
  if (text == "speed") return Task::speed;
  throw ConfigError("unknown task '" + text + "' (expected congestion or speed)");
}

std::string to_string(tvae::Layout layout) { return layout == tvae::Layout::transposed ? "transposed" : "per_node"; }

tvae::Layout parse_layout(const std::string& text) {
  if (text == "transposed") return tvae::Layout::transposed;
  if (text == "per_node") return tvae::Layout::per_node;
  throw ConfigError("unknown tvae layout '" + text + "' (expected transposed or per_node)");
}

namespace {

Index parse_index(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<Index>(out);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string flag(bool b) { return b ? "true" : "false"; }

std::string format_weights(const heads::ClassWeights& w) {
  return format_double(w.w[0]) + "," + format_double(w.w[1]) + "," + format_double(w.w[2]);
}

heads::ClassWeights parse_weights(const std::string& key, const std::string& text) {
  heads::ClassWeights out;
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw ConfigError(key + ": expected three comma-separated weights");
    out.w[i++] = parse_real(key, part);
  }
  if (i != 3) throw ConfigError(key + ": expected three comma-separated weights");
  return out;
}

const std::string& require(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
  if (tvae_hidden < 0) throw ConfigError("tvae_hidden must be >= 0");
  if (tvae_latent <= 0) throw ConfigError("tvae_latent must be positive");
  if (head_hidden1 <= 0 || head_hidden2 <= 0) throw ConfigError("head widths must be positive");
  if (gat_heads <= 0) throw ConfigError("gat_heads must be positive");
  if (segment_conv_width <= 0) throw ConfigError("segment_conv_width must be positive");
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) throw ConfigError("kl_beta must be finite and >= 0");
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
  if (!(clip_max > 0.0) || !std::isfinite(clip_max)) throw ConfigError("clip_max must be finite and positive");
}

std::map<std::string, std::string> ModelConfig::to_key_values() const {
  return {
      {"task", to_string(task)},
      {"embed_dim", std::to_string(embed_dim)},
      {"tvae_hidden", std::to_string(tvae_hidden)},
      {"tvae_latent", std::to_string(tvae_latent)},
      {"tvae_layout", to_string(tvae_layout)},
      {"head_hidden1", std::to_string(head_hidden1)},
      {"head_hidden2", std::to_string(head_hidden2)},
      {"gat_heads", std::to_string(gat_heads)},
      {"segment_conv_width", std::to_string(segment_conv_width)},
      {"kl_beta", format_double(kl_beta)},
      {"leaky_slope", format_double(slope)},
      {"dropout_p", format_double(dropout_p)},
      {"clip_max", format_double(clip_max)},
      {"global_normalization", flag(global_normalization)},
      {"dropout", flag(dropout)},
      {"noise", flag(noise)},
      {"week", flag(week)},
      {"time", flag(time)},
      {"segment_conv", flag(segment_conv)},
  };
}

ModelConfig ModelConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "task") c.task = parse_task(v);
    else if (k == "embed_dim") c.embed_dim = parse_index(k, v);
    else if (k == "tvae_hidden") c.tvae_hidden = parse_index(k, v);
    else if (k == "tvae_latent") c.tvae_latent = parse_index(k, v);
    else if (k == "tvae_layout") c.tvae_layout = parse_layout(v);
    else if (k == "head_hidden1") c.head_hidden1 = parse_index(k, v);
    else if (k == "head_hidden2") c.head_hidden2 = parse_index(k, v);
    else if (k == "gat_heads") c.gat_heads = parse_index(k, v);
    else if (k == "segment_conv_width") c.segment_conv_width = parse_index(k, v);
    else if (k == "kl_beta") c.kl_beta = parse_real(k, v);
    else if (k == "leaky_slope") c.slope = parse_real(k, v);
    else if (k == "dropout_p") c.dropout_p = parse_real(k, v);
    else if (k == "clip_max") c.clip_max = parse_real(k, v);
    else if (k == "global_normalization") c.global_normalization = parse_flag(k, v);
    else if (k == "dropout") c.dropout = parse_flag(k, v);
    else if (k == "noise") c.noise = parse_flag(k, v);
    else if (k == "week") c.week = parse_flag(k, v);
    else if (k == "time") c.time = parse_flag(k, v);
    else if (k == "segment_conv") c.segment_conv = parse_flag(k, v);
  }
  return c;
}

DataState fit_data_state(std::span<const graphmodel::CounterFrame> frames, Task task, double clip_max) {
  if (frames.empty()) throw DataError("cannot fit data state on an empty training split");
  DataState d;
  d.stats = preprocess::fit_stats(frames, clip_max);
  if (task == Task::congestion) {
    d.class_weights = heads::inverse_frequency_weights(frames);
  } else {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& f : frames) {
      for (double s : f.speed) {
        if (!std::isfinite(s)) continue;
        sum += s;
        ++n;
      }
    }
    if (n == 0) throw DataError("no speed labels in the training split");
    d.label_mean = sum / static_cast<double>(n);
    for (const auto& f : frames) {
      for (double s : f.speed) {
        if (std::isfinite(s)) sq += (s - d.label_mean) * (s - d.label_mean);
      }
    }
    d.label_std = std::sqrt(sq / static_cast<double>(n));
    if (!(d.label_std > 0.0)) d.label_std = 1.0;
  }
  return d;
}

Model::Model(const ModelConfig& config, const graphmodel::RoadGraph& graph, const DataState& data,
             std::uint64_t init_seed)
    : Model(config, graph, data, encoder::EdgeFeatureEncoder::fit(graph), init_seed) {}

Model::Model(const ModelConfig& config, const graphmodel::RoadGraph& graph, const DataState& data,
             encoder::EdgeFeatureEncoder edge_encoder, std::uint64_t init_seed)
    : config_(config),
      data_(data),
      num_nodes_(graph.num_nodes()),
      num_edges_(graph.num_edges()),
      num_supersegments_(graph.num_supersegments()) {
  config_.validate();
  if (config_.task == Task::speed && num_supersegments_ == 0) {
    throw DataError("speed task needs at least one super-segment");
  }
  Rng rng(init_seed);
  vae_ = tvae::CounterVae(store_, "tvae", config_.tvae_layout, num_nodes_,
                          {config_.tvae_hidden, config_.tvae_latent, config_.slope}, rng);
  encoder_ = encoder::GraphEncoder(store_, graph, std::move(edge_encoder),
                                   {config_.embed_dim, config_.gat_heads, config_.slope}, rng);
  const Index d = config_.embed_dim;
  const Index ew = encoder_.explicit_edge_features().cols();
  const Index temporal = (config_.week ? d : 0) + (config_.time ? d : 0);
  const heads::HeadShape hs{config_.head_hidden1, config_.head_hidden2, config_.slope,
                            config_.dropout ? config_.dropout_p : 0.0};
  if (config_.task == Task::congestion) {
    congestion_ = heads::CongestionHead(store_, 4 * d + temporal, hs, rng);
  } else {
    speed_ = heads::SpeedHead(store_, 4 * d + ew + temporal, hs, config_.segment_conv, config_.segment_conv_width,
                              graph, rng);
  }
}

ForwardResult Model::forward(Tape& tape, const graphmodel::CounterFrame& frame, bool training, Rng& rng) const {
  if (frame.counts.rows() != num_nodes_) throw DataError("frame has a different node count than the model");
  const Mat normalized = preprocess::normalize(frame.counts, frame.mask, data_.stats);
  const tvae::ReconOptions opts{training, config_.global_normalization, config_.noise};
  auto recon = tvae::reconstruct(tape, vae_, normalized, frame.mask, data_.stats, opts, rng);

  ForwardResult out;
  out.kl = recon.kl;
  out.recon_loss = tvae::loss_reconstruction(recon.recon, normalized, frame.mask);
  Var recon_term = out.recon_loss;
  if (config_.kl_beta > 0.0) recon_term = nx::add(recon_term, nx::scale(recon.kl, config_.kl_beta));

  encoder::FeatureBundle b;
  std::tie(b.u_d_plus, b.u_s_plus) = encoder_.node_features(tape, recon.u_d);
  const Index rows = config_.task == Task::congestion ? num_edges_ : num_supersegments_;
  if (config_.week || config_.time) {
    auto [w, t] = encoder_.temporal(tape, frame.time.weekday, frame.time.slot, rows);
    if (config_.week) b.v_w = w;
    if (config_.time) b.v_t = t;
  }

  if (config_.task == Task::congestion) {
    encoder_.edge_features(tape, b);
    out.output = congestion_.forward(tape, heads::fuse_congestion(b), training, rng);
    if (static_cast<Index>(frame.congestion.size()) != num_edges_) {
      throw DataError("frame has no congestion labels");
    }
    out.task_loss = heads::loss_weighted_ce(out.output, frame.congestion, data_.class_weights);
  } else {
    encoder_.supersegment_features(tape, b);
    Var raw = speed_.forward(tape, heads::fuse_speed(b), training, rng);
    out.output = nx::affine_scalar(raw, data_.label_std, data_.label_mean);
    if (static_cast<Index>(frame.speed.size()) != num_supersegments_) throw DataError("frame has no speed labels");
    Mat target(num_supersegments_, 1);
    for (Index s = 0; s < num_supersegments_; ++s) {
      target(s, 0) = frame.speed[static_cast<std::size_t>(s)];
      if (!std::isfinite(target(s, 0))) throw DataError("speed label is not finite");
    }
    out.task_loss = heads::loss_l1(out.output, target);
  }
  out.loss = heads::total_loss(recon_term, out.task_loss);
  return out;
}

Mat Model::predict(const graphmodel::CounterFrame& frame) const {
  if (frame.counts.rows() != num_nodes_) throw DataError("frame has a different node count than the model");
  Tape tape;
  Rng unused(0);
  const Mat normalized = preprocess::normalize(frame.counts, frame.mask, data_.stats);
  const tvae::ReconOptions opts{false, config_.global_normalization, config_.noise};
  auto recon = tvae::reconstruct(tape, vae_, normalized, frame.mask, data_.stats, opts, unused);
  encoder::FeatureBundle b;
  std::tie(b.u_d_plus, b.u_s_plus) = encoder_.node_features(tape, recon.u_d);
  const Index rows = config_.task == Task::congestion ? num_edges_ : num_supersegments_;
  if (config_.week || config_.time) {
    auto [w, t] = encoder_.temporal(tape, frame.time.weekday, frame.time.slot, rows);
    if (config_.week) b.v_w = w;
    if (config_.time) b.v_t = t;
  }
  if (config_.task == Task::congestion) {
    encoder_.edge_features(tape, b);
    return nx::softmax_rows_value(congestion_.forward(tape, heads::fuse_congestion(b), false, unused).value());
  }
  encoder_.supersegment_features(tape, b);
  Mat raw = speed_.forward(tape, heads::fuse_speed(b), false, unused).value();
  return (raw.array() * data_.label_std + data_.label_mean).matrix();
}

train::Checkpoint Model::to_checkpoint() const {
  train::Checkpoint c;
  for (const auto& [k, v] : config_.to_key_values()) c.meta["model." + k] = v;
  c.meta["data.class_weights"] = format_weights(data_.class_weights);
  c.meta["data.label_mean"] = format_double(data_.label_mean);
  c.meta["data.label_std"] = format_double(data_.label_std);
  c.meta["graph.nodes"] = std::to_string(num_nodes_);
  c.meta["graph.edges"] = std::to_string(num_edges_);
  c.meta["graph.supersegments"] = std::to_string(num_supersegments_);
  c.meta["encoder.edge_features"] = encoder_.edge_encoder().serialize();
  c.stats = data_.stats;
  for (std::size_t i = 0; i < store_.size(); ++i) c.tensors.push_back({store_[i].name, store_[i].value});
  return c;
}

Model Model::from_checkpoint(const train::Checkpoint& ckpt, const graphmodel::RoadGraph& graph) {
  auto check_dim = [&](const char* key, Index actual) {
    const std::string& v = require(ckpt.meta, key);
    if (v != std::to_string(actual)) {
      throw DataError(std::string("checkpoint/graph mismatch: ") + key + " is " + v + " in the checkpoint but " +
                      std::to_string(actual) + " in the graph");
    }
  };
  check_dim("graph.nodes", graph.num_nodes());
  check_dim("graph.edges", graph.num_edges());
  check_dim("graph.supersegments", graph.num_supersegments());

  std::map<std::string, std::string> model_kv;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.rfind("model.", 0) == 0) model_kv[k.substr(6)] = v;
  }
  ModelConfig config;
  DataState data;
  try {
    config = ModelConfig::from_key_values(model_kv);
    data.class_weights = parse_weights("data.class_weights", require(ckpt.meta, "data.class_weights"));
    data.label_mean = parse_real("data.label_mean", require(ckpt.meta, "data.label_mean"));
    data.label_std = parse_real("data.label_std", require(ckpt.meta, "data.label_std"));
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  data.stats = ckpt.stats;
  auto edge_encoder = encoder::EdgeFeatureEncoder::deserialize(require(ckpt.meta, "encoder.edge_features"));
  Model m(config, graph, data, std::move(edge_encoder), 0);
  m.load_parameters(ckpt);
  return m;
}

void Model::load_parameters(const train::Checkpoint& ckpt) {
  if (ckpt.tensors.size() != store_.size()) {
    throw DataError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                    std::to_string(store_.size()));
  }
  for (std::size_t i = 0; i < store_.size(); ++i) {
    auto& p = store_[i];
    const auto* t = ckpt.find(p.name);
    if (t == nullptr) throw DataError("checkpoint lacks tensor '" + p.name + "'");
    if (t->value.rows() != p.value.rows() || t->value.cols() != p.value.cols()) {
      throw DataError("checkpoint tensor '" + p.name + "' has shape " + std::to_string(t->value.rows()) + "x" +
                      std::to_string(t->value.cols()) + ", model expects " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()));
    }
    p.value = t->value;
  }
}

}  // namespace sparseflow::model
