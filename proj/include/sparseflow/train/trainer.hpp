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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparseflow/model.hpp"
#include "sparseflow/train/checkpoint.hpp"

namespace sparseflow::train {

using graphmodel::CounterFrame;
using model::Model;
using model::ModelConfig;
using model::Task;

// ---------------------------------------------------------------- optimiser

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
  std::int64_t t = 0;
  std::vector<Mat> m, v;  // allocated on the first step
};

/// One AdamW step with decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
/// Throws ShapeError when params, grads and moments disagree.
void adamw_step(std::span<Mat* const> params, std::span<const Mat* const> grads, OptimizerState& state);

/// Steps every parameter of `store` with its accumulated grad.
void adamw_step(numerics::ParameterStore<double>& store, OptimizerState& state);

// ---------------------------------------------------------------- config

enum class AverageMode { parameters, predictions };
enum class EnsembleRule { inverse, softmax };

std::string to_string(AverageMode mode);
AverageMode parse_average_mode(const std::string& text);
std::string to_string(EnsembleRule rule);
EnsembleRule parse_ensemble_rule(const std::string& text);

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-3;
  int epochs = 20;
  int batch_size = 2;
  std::uint64_t seed = 0;
  bool five_folds = false;
  int folds = 5;
  bool average = false;
  int average_k = 10;
  AverageMode average_mode = AverageMode::parameters;
  double val_fraction = 0.1;  // single-run holdout
  bool parallel_folds = false;
  std::optional<heads::ClassWeights> class_weights;  // unset: inverse frequency

  /// Core: 20 epochs, batch 2, lr 1e-3, wd 1e-3. Extended: 50 epochs,
  /// batch 2, lr 1e-4, wd 1e-3.
  static TrainConfig defaults_for(Task task);

  /// Throws ConfigError, including for average with epochs < average_k.
  void validate() const;

  std::map<std::string, std::string> to_key_values() const;
  /// Overlays recognised keys on `base`.
  static TrainConfig from_key_values(const std::map<std::string, std::string>& kv, TrainConfig base);
};

// ---------------------------------------------------------------- runs

struct EpochLoss {
  int epoch = 0;
  double train = 0.0;
  double val = 0.0;  // NaN without validation frames

  bool operator==(const EpochLoss&) const = default;
};

struct RunRecord {
  int fold = -1;  // -1: single run
  std::vector<EpochLoss> epochs;
  std::vector<std::string> checkpoint_paths;
  double validation_score = 0.0;  // NaN without validation frames
};

/// `fold`, `validation_score` and `checkpoint` header lines, then
/// `epoch <n> train <loss> val <loss>` per line; shortest round-trip doubles.
std::string format_run_record(const RunRecord& record);
RunRecord parse_run_record(const std::string& text, const std::string& source = "<memory>");

struct RunResult {
  RunRecord record;
  Checkpoint final_checkpoint;      // after averaging when enabled
  std::vector<Checkpoint> members;  // checkpoints whose predictions are averaged
  std::vector<Checkpoint> epoch_checkpoints;  // retained last epochs, oldest first
};

/// Trains one model on `train_frames`, validating on `val_frames` after
/// every epoch. Data statistics come from `train_frames` only. Throws
/// NumericFault (with epoch and batch) on a non-finite loss and DataError on
/// an empty training set.
RunResult fit(const ModelConfig& model_config, const TrainConfig& config, const graphmodel::RoadGraph& graph,
              std::span<const CounterFrame> train_frames, std::span<const CounterFrame> val_frames,
              std::uint64_t seed);

/// Single run: holds out config.val_fraction of the frames (seeded) and
/// trains on the rest.
RunResult train_run(const ModelConfig& model_config, const TrainConfig& config, const graphmodel::RoadGraph& graph,
                    std::span<const CounterFrame> frames, std::uint64_t seed);

/// One independent model per fold. k == 1 is train_run on all frames.
std::vector<RunResult> train_kfold(const ModelConfig& model_config, const TrainConfig& config,
                                   const graphmodel::RoadGraph& graph, std::span<const CounterFrame> frames,
                                   int k, std::uint64_t seed);

/// Dispatches on config.five_folds.
std::vector<RunResult> train(const ModelConfig& model_config, const TrainConfig& config,
                             const graphmodel::RoadGraph& graph, std::span<const CounterFrame> frames);

// ---------------------------------------------------------------- ensembles

/// Normalised member weights. inverse: w ~ 1/score (lower is better) or
/// w ~ score; softmax: w ~ exp(-score/tau) or exp(score/tau).
/// Throws ContractError for empty input, non-finite scores, or a
/// non-positive score under the inverse rule.
std::vector<double> ensemble_weights(std::span<const double> scores, bool lower_is_better,
                                     EnsembleRule rule = EnsembleRule::inverse, double tau = 1.0);

/// sum_i w_i * predictions_i with w from ensemble_weights().
Mat weighted_ensemble(std::span<const Mat> predictions, std::span<const double> scores, bool lower_is_better,
                      EnsembleRule rule = EnsembleRule::inverse, double tau = 1.0);

/// A weighted set of models evaluated together. Probabilities (congestion)
/// or speeds are mixed, never logits.
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(std::vector<Model> members, std::vector<double> weights);

  /// Equal weights.
  static Ensemble uniform(std::vector<Model> members);

  Mat predict(const CounterFrame& frame) const;

  Task task() const;
  std::size_t size() const { return members_.size(); }
  const Model& member(std::size_t i) const { return members_[i]; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<Model> members_;
  std::vector<double> weights_;
};

/// Uniform ensemble over every run's members.
Ensemble ensemble_from_runs(const std::vector<RunResult>& runs, const graphmodel::RoadGraph& graph);

// ---------------------------------------------------------------- metrics

struct Evaluation {
  Task task = Task::congestion;
  double score = 0.0;          // weighted CE (congestion) or MAE (speed)
  double unweighted_ce = 0.0;  // congestion only
  double accuracy = 0.0;       // congestion only
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  std::size_t count = 0;       // labelled edges or super-segments scored
};

/// Scores per-frame predictions (probabilities or speeds) against labels,
/// pooled over all frames. Throws DataError when nothing is labelled.
Evaluation evaluate_predictions(std::span<const Mat> predictions, std::span<const CounterFrame> frames, Task task,
                                const heads::ClassWeights& weights);

Evaluation evaluate(const Ensemble& ensemble, std::span<const CounterFrame> frames);
Evaluation evaluate(const Model& model, std::span<const CounterFrame> frames);

std::string format_evaluation(const Evaluation& e);

}  // namespace sparseflow::train
