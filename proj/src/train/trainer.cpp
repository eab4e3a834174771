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

#include "sparseflow/train/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>

#include "sparseflow/errors.hpp"

namespace sparseflow::train {

namespace nx = numerics;
using graphmodel::format_double;
using graphmodel::Index;
using numerics::Rng;
using Var = numerics::Var<double>;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream ids for derive_seed.
enum Stream : std::uint64_t { kSplit = 0, kInit = 1, kShuffle = 2, kNoise = 3, kFoldBase = 100 };

}  // namespace

// ---------------------------------------------------------------- optimiser

void adamw_step(std::span<Mat* const> params, std::span<const Mat* const> grads, OptimizerState& s) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: parameter and gradient counts differ");
  if (s.m.empty() && s.t == 0) {
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Mat* p : params) {
      s.m.push_back(Mat::Zero(p->rows(), p->cols()));
      s.v.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  if (s.m.size() != params.size()) throw ShapeError("adamw_step: optimiser state belongs to another parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i]->rows() != params[i]->rows() || grads[i]->cols() != params[i]->cols() ||
        s.m[i].rows() != params[i]->rows() || s.m[i].cols() != params[i]->cols()) {
      throw ShapeError("adamw_step: shape mismatch at parameter " + std::to_string(i));
    }
  }
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->array();
    const auto g = grads[i]->array();
    s.m[i].array() = s.beta1 * s.m[i].array() + (1.0 - s.beta1) * g;
    s.v[i].array() = s.beta2 * s.v[i].array() + (1.0 - s.beta2) * g.square();
    const auto m_hat = s.m[i].array() / bc1;
    const auto v_hat = s.v[i].array() / bc2;
    theta -= s.lr * (m_hat / (v_hat.sqrt() + s.eps) + s.weight_decay * theta);
  }
}

void adamw_step(numerics::ParameterStore<double>& store, OptimizerState& state) {
  std::vector<Mat*> params;
  std::vector<const Mat*> grads;
  for (std::size_t i = 0; i < store.size(); ++i) {
    params.push_back(&store[i].value);
    grads.push_back(&store[i].grad);
  }
  adamw_step(params, grads, state);
}

// ---------------------------------------------------------------- config

std::string to_string(AverageMode mode) { return mode == AverageMode::parameters ? "parameters" : "predictions"; }

AverageMode parse_average_mode(const std::string& text) {
  if (text == "parameters") return AverageMode::parameters;
  if (text == "predictions") return AverageMode::predictions;
  throw ConfigError("unknown average mode '" + text + "' (expected parameters or predictions)");
}

std::string to_string(EnsembleRule rule) { return rule == EnsembleRule::inverse ? "inverse" : "softmax"; }

EnsembleRule parse_ensemble_rule(const std::string& text) {
  if (text == "inverse") return EnsembleRule::inverse;
  if (text == "softmax") return EnsembleRule::softmax;
  throw ConfigError("unknown ensemble rule '" + text + "' (expected inverse or softmax)");
}

TrainConfig TrainConfig::defaults_for(Task task) {
  TrainConfig c;
  if (task == Task::speed) {
    c.epochs = 50;
    c.lr = 1e-4;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (folds <= 0) throw ConfigError("folds must be positive");
  if (average_k <= 0) throw ConfigError("average_k must be positive");
  if (average && epochs < average_k) {
    throw ConfigError("average over the last " + std::to_string(average_k) + " epochs needs epochs >= " +
                      std::to_string(average_k) + " (got " + std::to_string(epochs) + ")");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  if (class_weights) {
    for (double w : class_weights->w) {
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be finite and positive");
    }
  }
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": cannot parse '" + v + "'");
  return out;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace

std::map<std::string, std::string> TrainConfig::to_key_values() const {
  std::map<std::string, std::string> kv{
      {"lr", format_double(lr)},
      {"weight_decay", format_double(weight_decay)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"five_folds", flag(five_folds)},
      {"folds", std::to_string(folds)},
      {"average", flag(average)},
      {"average_k", std::to_string(average_k)},
      {"average_mode", to_string(average_mode)},
      {"val_fraction", format_double(val_fraction)},
      {"parallel_folds", flag(parallel_folds)},
      {"class_weights", "auto"},
  };
  if (class_weights) {
    const auto& w = class_weights->w;
    kv["class_weights"] = format_double(w[0]) + "," + format_double(w[1]) + "," + format_double(w[2]);
  }
  return kv;
}

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string>& kv, TrainConfig c) {
  for (const auto& [k, v] : kv) {
    if (k == "lr") c.lr = parse_number<double>(k, v);
    else if (k == "weight_decay") c.weight_decay = parse_number<double>(k, v);
    else if (k == "epochs") c.epochs = parse_number<int>(k, v);
    else if (k == "batch_size") c.batch_size = parse_number<int>(k, v);
    else if (k == "seed") c.seed = parse_number<std::uint64_t>(k, v);
    else if (k == "five_folds") c.five_folds = parse_flag(k, v);
    else if (k == "folds") c.folds = parse_number<int>(k, v);
    else if (k == "average") c.average = parse_flag(k, v);
    else if (k == "average_k") c.average_k = parse_number<int>(k, v);
    else if (k == "average_mode") c.average_mode = parse_average_mode(v);
    else if (k == "val_fraction") c.val_fraction = parse_number<double>(k, v);
    else if (k == "parallel_folds") c.parallel_folds = parse_flag(k, v);
    else if (k == "class_weights") {
      if (v == "auto") {
        c.class_weights.reset();
      } else {
        heads::ClassWeights w;
        std::stringstream ss(v);
        std::string part;
        std::size_t i = 0;
        while (std::getline(ss, part, ',')) {
          if (i >= 3) throw ConfigError("class_weights: expected 'auto' or three comma-separated values");
          w.w[i++] = parse_number<double>(k, part);
        }
        if (i != 3) throw ConfigError("class_weights: expected 'auto' or three comma-separated values");
        c.class_weights = w;
      }
    }
  }
  return c;
}

// ---------------------------------------------------------------- runs

std::string format_run_record(const RunRecord& record) {
  std::string out = "fold " + std::to_string(record.fold) + "\n";
  out += "validation_score " + format_double(record.validation_score) + "\n";
  for (const auto& path : record.checkpoint_paths) out += "checkpoint " + path + "\n";
  for (const auto& e : record.epochs) {
    out += "epoch " + std::to_string(e.epoch) + " train " + format_double(e.train) + " val " + format_double(e.val) +
           "\n";
  }
  return out;
}

namespace {

double parse_number(const std::string& s, const std::string& source, int lineno, const char* field) {
  if (s == "NaN" || s == "nan") return kNaN;
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw DataError(source + ":" + std::to_string(lineno) + ": bad " + field + " value '" + s + "'");
  }
  return v;
}

}  // namespace

RunRecord parse_run_record(const std::string& text, const std::string& source) {
  RunRecord r;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line.rfind("fold ", 0) == 0) {
      if (!(ls >> line >> r.fold)) throw DataError(source + ":" + std::to_string(lineno) + ": bad fold line");
      continue;
    }
    if (line.rfind("checkpoint ", 0) == 0) {
      r.checkpoint_paths.push_back(line.substr(11));
      continue;
    }
    if (line.rfind("validation_score ", 0) == 0) {
      r.validation_score = parse_number(line.substr(17), source, lineno, "validation_score");
      continue;
    }
    std::string k1, k2, k3, train, val;
    int epoch = 0;
    if (!(ls >> k1 >> epoch >> k2 >> train >> k3 >> val) || k1 != "epoch" || k2 != "train" || k3 != "val") {
      throw DataError(source + ":" + std::to_string(lineno) + ": expected 'epoch <n> train <loss> val <loss>'");
    }
    auto num = [&](const std::string& s, const char* field) { return parse_number(s, source, lineno, field); };
    if (epoch != static_cast<int>(r.epochs.size()) + 1) {
      throw DataError(source + ":" + std::to_string(lineno) + ": epochs must be contiguous from 1");
    }
    r.epochs.push_back({epoch, num(train, "train"), num(val, "val")});
  }
  return r;
}

namespace {

double mean_eval_loss(const Model& model, std::span<const CounterFrame> frames) {
  if (frames.empty()) return kNaN;
  Rng unused(0);
  double total = 0.0;
  for (const auto& f : frames) {
    model::Tape tape;
    total += model.forward(tape, f, false, unused).loss.value()(0, 0);
  }
  return total / static_cast<double>(frames.size());
}

}  // namespace

RunResult fit(const ModelConfig& model_config, const TrainConfig& config, const graphmodel::RoadGraph& graph,
              std::span<const CounterFrame> train_frames, std::span<const CounterFrame> val_frames,
              std::uint64_t seed) {
  config.validate();
  if (train_frames.empty()) throw DataError("training split is empty");
  model::DataState data = model::fit_data_state(train_frames, model_config.task, model_config.clip_max);
  if (config.class_weights && model_config.task == Task::congestion) data.class_weights = *config.class_weights;

  Model model(model_config, graph, data, nx::derive_seed(seed, kInit));
  auto& store = model.parameters();
  OptimizerState opt;
  opt.lr = config.lr;
  opt.weight_decay = config.weight_decay;

  Rng shuffle_rng(nx::derive_seed(seed, kShuffle));
  Rng noise_rng(nx::derive_seed(seed, kNoise));
  const std::size_t keep = config.average ? static_cast<std::size_t>(config.average_k) : 1;

  RunResult result;
  std::vector<std::size_t> order(train_frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      model::Tape tape;
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        losses.push_back(model.forward(tape, train_frames[order[i]], true, noise_rng).loss);
      }
      Var loss = nx::scale(nx::sum(nx::concat_rows(losses)), 1.0 / static_cast<double>(losses.size()));
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw NumericFault("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1));
      }
      store.zero_grad();
      tape.backward(loss);
      adamw_step(store, opt);
      epoch_loss += value;
      ++batches;
    }
    const double val = mean_eval_loss(model, val_frames);
    result.record.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches), val});
    result.epoch_checkpoints.push_back(model.to_checkpoint());
    if (result.epoch_checkpoints.size() > keep) result.epoch_checkpoints.erase(result.epoch_checkpoints.begin());
  }

  if (config.average && config.average_mode == AverageMode::parameters) {
    result.final_checkpoint = average_last_k(result.epoch_checkpoints, static_cast<std::size_t>(config.average_k));
    result.members = {result.final_checkpoint};
  } else if (config.average) {
    result.final_checkpoint = result.epoch_checkpoints.back();
    result.members = result.epoch_checkpoints;
  } else {
    result.final_checkpoint = result.epoch_checkpoints.back();
    result.members = {result.final_checkpoint};
  }

  if (val_frames.empty()) {
    result.record.validation_score = kNaN;
  } else {
    std::vector<Model> members;
    for (const auto& c : result.members) members.push_back(Model::from_checkpoint(c, graph));
    result.record.validation_score = evaluate(Ensemble::uniform(std::move(members)), val_frames).score;
  }
  return result;
}

RunResult train_run(const ModelConfig& model_config, const TrainConfig& config, const graphmodel::RoadGraph& graph,
                    std::span<const CounterFrame> frames, std::uint64_t seed) {
  config.validate();
  if (frames.empty()) throw DataError("dataset is empty");
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(nx::derive_seed(seed, kSplit));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(config.val_fraction * static_cast<double>(frames.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<CounterFrame> train_frames, val_frames;
  for (auto i : train_idx) train_frames.push_back(frames[i]);
  for (auto i : val_idx) val_frames.push_back(frames[i]);
  return fit(model_config, config, graph, train_frames, val_frames, seed);
}

std::vector<RunResult> train_kfold(const ModelConfig& model_config, const TrainConfig& config,
                                   const graphmodel::RoadGraph& graph, std::span<const CounterFrame> frames,
                                   int k, std::uint64_t seed) {
  config.validate();
  if (k <= 0) throw ConfigError("fold count must be positive");
  if (frames.empty()) throw DataError("dataset is empty");
  if (k == 1) return {train_run(model_config, config, graph, frames, seed)};

  const auto folds = graphmodel::kfold_split(frames.size(), static_cast<std::size_t>(k), seed);
  auto run_fold = [&](std::size_t f) {
    std::vector<CounterFrame> tr, ho;
    for (auto i : folds[f].train) tr.push_back(frames[i]);
    for (auto i : folds[f].holdout) ho.push_back(frames[i]);
    RunResult r = fit(model_config, config, graph, tr, ho, nx::derive_seed(seed, kFoldBase + f));
    r.record.fold = static_cast<int>(f);
    return r;
  };

  std::vector<RunResult> out;
  if (config.parallel_folds) {
    std::vector<std::future<RunResult>> pending;
    for (std::size_t f = 0; f < folds.size(); ++f) pending.push_back(std::async(std::launch::async, run_fold, f));
    for (auto& p : pending) out.push_back(p.get());
  } else {
    for (std::size_t f = 0; f < folds.size(); ++f) out.push_back(run_fold(f));
  }
  return out;
}

std::vector<RunResult> train(const ModelConfig& model_config, const TrainConfig& config,
                             const graphmodel::RoadGraph& graph, std::span<const CounterFrame> frames) {
  if (config.five_folds) return train_kfold(model_config, config, graph, frames, config.folds, config.seed);
  return {train_run(model_config, config, graph, frames, config.seed)};
}

// ---------------------------------------------------------------- ensembles

std::vector<double> ensemble_weights(std::span<const double> scores, bool lower_is_better, EnsembleRule rule,
                                     double tau) {
  if (scores.empty()) throw ContractError("ensemble: no scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ContractError("ensemble: scores must be finite");
  }
  std::vector<double> w(scores.size());
  if (rule == EnsembleRule::inverse) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!(scores[i] > 0.0)) throw ContractError("ensemble: inverse weighting needs positive scores");
      w[i] = lower_is_better ? 1.0 / scores[i] : scores[i];
    }
  } else {
    if (!(tau > 0.0)) throw ContractError("ensemble: temperature must be positive");
    const double sign = lower_is_better ? -1.0 : 1.0;
    double top = -std::numeric_limits<double>::infinity();
    for (double s : scores) top = std::max(top, sign * s / tau);
    for (std::size_t i = 0; i < scores.size(); ++i) w[i] = std::exp(sign * scores[i] / tau - top);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

Mat weighted_ensemble(std::span<const Mat> predictions, std::span<const double> scores, bool lower_is_better,
                      EnsembleRule rule, double tau) {
  if (predictions.size() != scores.size()) throw ContractError("ensemble: one score per prediction");
  const auto w = ensemble_weights(scores, lower_is_better, rule, tau);
  if (predictions.size() == 1) return predictions[0];
  Mat out = Mat::Zero(predictions[0].rows(), predictions[0].cols());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].rows() != out.rows() || predictions[i].cols() != out.cols()) {
      throw ShapeError("ensemble: prediction shapes differ");
    }
    out += w[i] * predictions[i];
  }
  return out;
}

Ensemble::Ensemble(std::vector<Model> members, std::vector<double> weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
  if (members_.empty()) throw ContractError("ensemble: no members");
  if (weights_.size() != members_.size()) throw ContractError("ensemble: one weight per member");
  for (const auto& m : members_) {
    if (m.config().task != members_.front().config().task) throw ContractError("ensemble: members mix tasks");
  }
}

Ensemble Ensemble::uniform(std::vector<Model> members) {
  const std::size_t n = members.size();
  return Ensemble(std::move(members), std::vector<double>(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n)));
}

Mat Ensemble::predict(const CounterFrame& frame) const {
  if (members_.size() == 1) return members_[0].predict(frame);
  Mat out;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    Mat p = members_[i].predict(frame);
    if (i == 0) out = Mat::Zero(p.rows(), p.cols());
    out += weights_[i] * p;
  }
  return out;
}

Task Ensemble::task() const {
  if (members_.empty()) throw ContractError("ensemble: no members");
  return members_.front().config().task;
}

Ensemble ensemble_from_runs(const std::vector<RunResult>& runs, const graphmodel::RoadGraph& graph) {
  std::vector<Model> members;
  for (const auto& r : runs) {
    for (const auto& c : r.members) members.push_back(Model::from_checkpoint(c, graph));
  }
  return Ensemble::uniform(std::move(members));
}

// ---------------------------------------------------------------- metrics

Evaluation evaluate_predictions(std::span<const Mat> predictions, std::span<const CounterFrame> frames, Task task,
                                const heads::ClassWeights& weights) {
  if (predictions.size() != frames.size()) throw ContractError("evaluate: one prediction per frame");
  Evaluation e;
  e.task = task;
  if (task == Task::speed) {
    double abs_sum = 0.0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& speed = frames[f].speed;
      if (static_cast<Index>(speed.size()) != predictions[f].rows()) {
        throw DataError("evaluate: frame " + std::to_string(f) + " lacks speed labels");
      }
      for (std::size_t s = 0; s < speed.size(); ++s) {
        if (!std::isfinite(speed[s])) continue;
        abs_sum += std::abs(predictions[f](static_cast<Index>(s), 0) - speed[s]);
        ++e.count;
      }
    }
    if (e.count == 0) throw DataError("evaluate: no labelled super-segments");
    e.score = abs_sum / static_cast<double>(e.count);
    return e;
  }

  double weighted = 0.0, plain = 0.0;
  std::size_t correct = 0;
  std::array<double, 3> tp{}, predicted{}, actual{};
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& labels = frames[f].congestion;
    const Mat& p = predictions[f];
    if (static_cast<Index>(labels.size()) != p.rows() || p.cols() != graphmodel::kCongestionClasses) {
      throw DataError("evaluate: frame " + std::to_string(f) + " prediction/label shape mismatch");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int y = labels[i];
      if (y < 0) continue;
      const auto row = static_cast<Index>(i);
      const double logp = std::log(std::max(p(row, y), std::numeric_limits<double>::min()));
      weighted -= weights.w[static_cast<std::size_t>(y)] * logp;
      plain -= logp;
      Index arg = 0;
      p.row(row).maxCoeff(&arg);
      predicted[static_cast<std::size_t>(arg)] += 1.0;
      actual[static_cast<std::size_t>(y)] += 1.0;
      if (arg == y) {
        ++correct;
        tp[static_cast<std::size_t>(y)] += 1.0;
      }
      ++e.count;
    }
  }
  if (e.count == 0) throw DataError("evaluate: no labelled edges");
  const double n = static_cast<double>(e.count);
  e.score = weighted / n;
  e.unweighted_ce = plain / n;
  e.accuracy = static_cast<double>(correct) / n;
  for (std::size_t c = 0; c < 3; ++c) {
    e.precision[c] = predicted[c] > 0 ? tp[c] / predicted[c] : 0.0;
    e.recall[c] = actual[c] > 0 ? tp[c] / actual[c] : 0.0;
  }
  return e;
}

Evaluation evaluate(const Ensemble& ensemble, std::span<const CounterFrame> frames) {
  std::vector<Mat> preds;
  preds.reserve(frames.size());
  for (const auto& f : frames) preds.push_back(ensemble.predict(f));
  return evaluate_predictions(preds, frames, ensemble.task(), ensemble.member(0).data().class_weights);
}

Evaluation evaluate(const Model& model, std::span<const CounterFrame> frames) {
  std::vector<Mat> preds;
  preds.reserve(frames.size());
  for (const auto& f : frames) preds.push_back(model.predict(f));
  return evaluate_predictions(preds, frames, model.config().task, model.data().class_weights);
}

std::string format_evaluation(const Evaluation& e) {
  std::ostringstream os;
  if (e.task == Task::speed) {
    os << "mae " << format_double(e.score) << "\n";
    os << "segments " << e.count << "\n";
    return os.str();
  }
  static const char* names[3] = {"red", "yellow", "green"};
  os << "weighted_ce " << format_double(e.score) << "\n";
  os << "unweighted_ce " << format_double(e.unweighted_ce) << "\n";
  os << "accuracy " << format_double(e.accuracy) << "\n";
  os << "edges " << e.count << "\n";
  for (std::size_t c = 0; c < 3; ++c) {
    os << "class " << names[c] << " precision " << format_double(e.precision[c]) << " recall "
       << format_double(e.recall[c]) << "\n";
  }
  return os.str();
}

}  // namespace sparseflow::train
