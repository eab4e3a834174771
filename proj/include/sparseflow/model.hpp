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

#include <cstdint>
#include <map>
#include <string>

#include "sparseflow/encoder.hpp"
#include "sparseflow/heads.hpp"
#include "sparseflow/train/checkpoint.hpp"
#include "sparseflow/tvae.hpp"

namespace sparseflow::model {

using graphmodel::Mat;
using numerics::Index;
using numerics::Rng;
using Tape = numerics::Tape<double>;
using Var = numerics::Var<double>;
using ParameterStore = numerics::ParameterStore<double>;

enum class Task { congestion, speed };

std::string to_string(Task task);
Task parse_task(const std::string& text);
std::string to_string(tvae::Layout layout);
tvae::Layout parse_layout(const std::string& text);

/// Architecture and feature toggles. Everything here is fixed at
/// construction and recorded in checkpoints.
struct ModelConfig {
  Task task = Task::congestion;
  Index embed_dim = 32;
  Index tvae_hidden = 0;  // 0: min(256, |V|)
  Index tvae_latent = 32;
  tvae::Layout tvae_layout = tvae::Layout::transposed;
  Index head_hidden1 = 256;
  Index head_hidden2 = 64;
  Index gat_heads = 1;
  Index segment_conv_width = 32;
  double kl_beta = 0.0;
  double slope = 0.2;
  double dropout_p = 0.2;
  double clip_max = kDefaultClipMax;

  bool global_normalization = true;
  bool dropout = true;
  bool noise = true;
  bool week = true;
  bool time = true;
  bool segment_conv = false;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  std::map<std::string, std::string> to_key_values() const;
  /// Reads the keys written by to_key_values(); missing keys keep defaults,
  /// unknown keys are ignored. Throws ConfigError on malformed values.
  static ModelConfig from_key_values(const std::map<std::string, std::string>& kv);

  bool operator==(const ModelConfig&) const = default;
};

/// Quantities fitted on the training split.
struct DataState {
  NormStats stats;
  heads::ClassWeights class_weights;
  double label_mean = 0.0;  // speed labels; the speed head predicts mean + std * output
  double label_std = 1.0;

  bool operator==(const DataState&) const = default;
};

/// Fits stats, inverse-frequency class weights and speed label moments on
/// `frames`. Class weights stay uniform for the speed task.
DataState fit_data_state(std::span<const graphmodel::CounterFrame> frames, Task task, double clip_max);

struct ForwardResult {
  Var loss;         // L_r (+ beta * kl) + task loss
  Var recon_loss;   // L_r
  Var task_loss;    // weighted CE or L1
  Var kl;
  Var output;       // |E| x 3 logits or |S| x 1 speeds
};

class Model {
 public:
  /// Fresh model; parameters initialised from `init_seed`.
  Model(const ModelConfig& config, const graphmodel::RoadGraph& graph, const DataState& data, std::uint64_t init_seed);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// One frame through the whole pipeline. With training == false, noise,
  /// dropout and VAE sampling are off and `rng` is not used.
  ForwardResult forward(Tape& tape, const graphmodel::CounterFrame& frame, bool training, Rng& rng) const;

  /// Evaluation output for one frame: class probabilities (|E| x 3) or
  /// speeds (|S| x 1).
  Mat predict(const graphmodel::CounterFrame& frame) const;

  train::Checkpoint to_checkpoint() const;

  /// Rebuilds a model; throws DataError when the checkpoint does not fit
  /// `graph` or lacks tensors.
  static Model from_checkpoint(const train::Checkpoint& ckpt, const graphmodel::RoadGraph& graph);

  /// Overwrites parameter values from `ckpt` (names and shapes must match).
  void load_parameters(const train::Checkpoint& ckpt);

  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const DataState& data() const { return data_; }
  const tvae::CounterVae& vae() const { return vae_; }
  const encoder::GraphEncoder& graph_encoder() const { return encoder_; }

 private:
  Model(const ModelConfig& config, const graphmodel::RoadGraph& graph, const DataState& data,
        encoder::EdgeFeatureEncoder edge_encoder, std::uint64_t init_seed);

  ModelConfig config_;
  DataState data_;
  Index num_nodes_ = 0, num_edges_ = 0, num_supersegments_ = 0;
  ParameterStore store_;
  tvae::CounterVae vae_;
  encoder::GraphEncoder encoder_;
  heads::CongestionHead congestion_;
  heads::SpeedHead speed_;
};

}  // namespace sparseflow::model
