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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "sparseflow/cli.hpp"
#include "sparseflow/encoder.hpp"
#include "sparseflow/graphmodel/synthetic.hpp"
#include "sparseflow/preprocess.hpp"
#include "sparseflow/train/trainer.hpp"
#include "support.hpp"

namespace en = sparseflow::encoder;
namespace gm = sparseflow::graphmodel;
namespace md = sparseflow::model;
namespace nx = sparseflow::numerics;
namespace pp = sparseflow::preprocess;
namespace tr = sparseflow::train;
namespace tv = sparseflow::tvae;
namespace fs = std::filesystem;
using namespace sparseflow::testing;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
// Denominator floor: one ulp of an O(10) loss over 2 eps is ~4e-10, so
// entries below ~1e-5 in magnitude are compared on an absolute scale.
constexpr double kGradFloor = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr int kMergeTrials = 1000;
constexpr int kVaeSteps = 200;
constexpr double kDistinctFraction = 0.95;
constexpr double kDistinctGap = 1e-6;
constexpr int kCoreEpochs = 30;  // budget: 50
constexpr int kCoreEpochBudget = 50;
constexpr double kCoreCe = 0.2;
constexpr double kCoreAccuracy = 0.9;
constexpr int kSpeedEpochs = 60;  // budget: 100
constexpr int kSpeedEpochBudget = 100;
constexpr double kSpeedLr = 1e-3;
constexpr double kSpeedMaeFraction = 0.1;
constexpr double kOverfitSeconds = 300.0;
constexpr int kAblationSeeds = 5;
constexpr double kOracleTol = 1e-12;
constexpr double kAttentionTol = 1e-10;
constexpr int kSerializationInputs = 100;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

gm::SynthSpec reference_city() {
  return gm::SynthSpec{};  // 50 nodes, 120 edges, 10 super-segments, 200 frames, rho 0.5
}

// ------------------------------------------------------------ criterion 1

void gradient_integrity() {
  const auto t0 = Clock::now();
  const auto g = toy_graph();
  std::mt19937_64 rng(1);
  std::vector<gm::CounterFrame> frames;
  for (int i = 0; i < 4; ++i) frames.push_back(random_frame(g, rng, {static_cast<Index>(i), 5}));
  double worst = 0.0;
  std::size_t checked = 0;
  std::string where;
  for (auto task : {md::Task::congestion, md::Task::speed}) {
    md::ModelConfig mc;
    mc.task = task;
    mc.embed_dim = 4;
    mc.tvae_hidden = 5;
    mc.tvae_latent = 3;
    mc.head_hidden1 = 8;
    mc.head_hidden2 = 4;
    mc.segment_conv = task == md::Task::speed;
    mc.segment_conv_width = 3;
    mc.kl_beta = 0.05;
    md::Model m(mc, g, md::fit_data_state(frames, task, sparseflow::kDefaultClipMax), 2);
    auto loss = [&](Tape& t) {
      nx::Rng r(3);
      return m.forward(t, frames[0], true, r).loss;
    };
    const auto res = check_parameter_gradients(m.parameters(), loss, kGradEps, 1, kGradFloor);
    checked += res.checked;
    if (res.max_rel_error > worst) {
      worst = res.max_rel_error;
      where = md::to_string(task) + " " + res.worst;
    }
  }
  const double secs = seconds_since(t0);
  report(1, "gradient integrity", worst < kGradTol && secs < kGradSeconds,
         fmt("max rel error %.3g", worst) + " over " + std::to_string(checked) + " params (tol 1e-4, floor 1e-5), " +
             fmt("%.1f s (limit 60 s)", secs) + (where.empty() ? "" : ", worst " + where));
}

// ------------------------------------------------------------ criterion 2

void merge_exactness() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> dim(1, 40);
  std::bernoulli_distribution bit(0.5);
  int bad = 0;
  for (int trial = 0; trial < kMergeTrials; ++trial) {
    const Index r = dim(rng), c = dim(rng);
    const Mat x = random_matrix(r, c, rng, -1e3, 1e3), recon = random_matrix(r, c, rng, -1e3, 1e3);
    Mat m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = bit(rng) ? 1.0 : 0.0;
    const Mat plain = tv::masked_merge(x, m, recon);
    Tape t;
    const Mat diff = tv::masked_merge(x, m, t.constant(recon)).value();
    for (Index i = 0; i < m.size(); ++i) {
      const double want = m.data()[i] == 1.0 ? x.data()[i] : recon.data()[i];
      if (std::memcmp(&want, &plain.data()[i], sizeof want) != 0 || std::memcmp(&want, &diff.data()[i], sizeof want) != 0) {
        ++bad;
        break;
      }
    }
  }
  report(2, "masked merge exactness", bad == 0,
         std::to_string(kMergeTrials - bad) + "/" + std::to_string(kMergeTrials) + " triples bitwise exact");
}

// ------------------------------------------------------------ criterion 3

struct GapStats {
  std::size_t frames = 0;
  std::size_t distinct = 0;
  double max_gap = 0.0;
};

GapStats vae_gaps(tv::Layout layout, const gm::SyntheticCity& city) {
  const auto stats = pp::fit_stats(city.frames);
  tv::ParameterStore store;
  nx::Rng rng(5);
  tv::CounterVae vae(store, "tvae", layout, city.graph.num_nodes(), {0, 32, 0.2}, rng);
  tr::OptimizerState opt;
  std::vector<Mat> normalized;
  for (const auto& f : city.frames) normalized.push_back(pp::normalize(f.counts, f.mask, stats));
  const tv::ReconOptions train_opts{true, true, true};
  for (int step = 0; step < kVaeSteps; ++step) {
    const std::size_t i = static_cast<std::size_t>(step) % city.frames.size();
    store.zero_grad();
    Tape t;
    auto out = tv::reconstruct(t, vae, normalized[i], city.frames[i].mask, stats, train_opts, rng);
    t.backward(tv::loss_reconstruction(out.recon, normalized[i], city.frames[i].mask));
    tr::adamw_step(store, opt);
  }
  GapStats g;
  for (std::size_t i = 0; i < city.frames.size(); ++i) {
    const auto& mask = city.frames[i].mask;
    std::vector<Index> missing;
    for (Index v = 0; v < mask.rows(); ++v) {
      if (mask.row(v).sum() == 0.0) missing.push_back(v);
    }
    if (missing.size() < 2) continue;
    Tape t;
    const Mat u = tv::reconstruct(t, vae, normalized[i], mask, stats, {}, rng).u_d.value();
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < missing.size(); ++a) {
      for (std::size_t b = a + 1; b < missing.size(); ++b) {
        const double gap = (u.row(missing[a]) - u.row(missing[b])).cwiseAbs().maxCoeff();
        min_gap = std::min(min_gap, gap);
        g.max_gap = std::max(g.max_gap, gap);
      }
    }
    ++g.frames;
    if (min_gap > kDistinctGap) ++g.distinct;
  }
  return g;
}

void tvae_distinctness() {
  auto spec = reference_city();
  spec.frames = 100;
  const auto city = gm::generate_synthetic_city(spec, 6);
  const auto tvae = vae_gaps(tv::Layout::transposed, city);
  const auto plain = vae_gaps(tv::Layout::per_node, city);
  const double frac = tvae.frames ? static_cast<double>(tvae.distinct) / static_cast<double>(tvae.frames) : 0.0;
  const bool ok = tvae.frames > 0 && frac >= kDistinctFraction && plain.frames > 0 && plain.max_gap == 0.0;
  report(3, "TVAE distinctness", ok,
         "transposed: " + std::to_string(tvae.distinct) + "/" + std::to_string(tvae.frames) +
             " frames with all missing-node pairs distinct (need >= 95%); per-node control max gap " +
             fmt("%.3g (need exactly 0)", plain.max_gap));
}

// ------------------------------------------------------------ criteria 4, 5

md::Model train_full(const md::ModelConfig& mc, const tr::TrainConfig& tc, const gm::SyntheticCity& city,
                     std::uint64_t seed) {
  const std::vector<gm::CounterFrame> none;
  const auto run = tr::fit(mc, tc, city.graph, city.frames, none, seed);
  return md::Model::from_checkpoint(run.final_checkpoint, city.graph);
}

void core_overfit() {
  const auto t0 = Clock::now();
  const auto city = gm::generate_synthetic_city(reference_city(), 7);
  md::ModelConfig mc;  // every toggle on; segment convolution belongs to the speed task
  auto tc = tr::TrainConfig::defaults_for(md::Task::congestion);
  tc.epochs = kCoreEpochs;
  const md::Model m = train_full(mc, tc, city, 8);
  const auto e = tr::evaluate(m, city.frames);
  const double secs = seconds_since(t0);
  const bool ok = kCoreEpochs <= kCoreEpochBudget && e.score < kCoreCe && e.accuracy > kCoreAccuracy &&
                  secs < kOverfitSeconds;
  report(4, "core overfit", ok,
         fmt("training weighted CE %.4f (need < 0.2), ", e.score) + fmt("accuracy %.4f (need > 0.9), ", e.accuracy) +
             std::to_string(kCoreEpochs) + " epochs, " + fmt("%.1f s (limit 300 s)", secs));
}

void speed_overfit() {
  const auto t0 = Clock::now();
  const auto city = gm::generate_synthetic_city(reference_city(), 7);
  md::ModelConfig mc;
  mc.task = md::Task::speed;
  mc.segment_conv = true;
  auto tc = tr::TrainConfig::defaults_for(md::Task::speed);
  tc.epochs = kSpeedEpochs;
  tc.lr = kSpeedLr;
  tc.average = true;
  const md::Model m = train_full(mc, tc, city, 9);
  const auto e = tr::evaluate(m, city.frames);
  std::vector<double> labels;
  for (const auto& f : city.frames) labels.insert(labels.end(), f.speed.begin(), f.speed.end());
  const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
  double var = 0.0;
  for (double v : labels) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(labels.size()));
  const double secs = seconds_since(t0);
  const bool ok = kSpeedEpochs <= kSpeedEpochBudget && e.score < kSpeedMaeFraction * sd && secs < kOverfitSeconds;
  report(5, "speed overfit", ok,
         fmt("training MAE %.4f", e.score) + fmt(" vs label std %.4f (need < 10%%), ", sd) +
             std::to_string(kSpeedEpochs) + " epochs at lr 1e-3 with last-10 averaging, " +
             fmt("%.1f s (limit 300 s)", secs));
}

// ------------------------------------------------------------ criterion 6

void ablation_direction() {
  const auto t0 = Clock::now();
  double single_total = 0.0, folds_total = 0.0;
  std::string per_seed;
  for (int s = 0; s < kAblationSeeds; ++s) {
    gm::SynthSpec spec;
    spec.nodes = 30;
    spec.edges = 72;
    spec.supersegments = 6;
    spec.frames = 100;
    const auto city = gm::generate_synthetic_city(spec, 100 + static_cast<std::uint64_t>(s));
    // Shared holdout: last 20% of a seeded permutation.
    const auto split = gm::kfold_split(city.frames.size(), 5, 200 + static_cast<std::uint64_t>(s));
    std::vector<gm::CounterFrame> train_frames, val_frames;
    for (auto i : split[0].train) train_frames.push_back(city.frames[i]);
    for (auto i : split[0].holdout) val_frames.push_back(city.frames[i]);

    // Default model and training configuration.
    const md::ModelConfig mc;
    const auto tc = tr::TrainConfig::defaults_for(md::Task::congestion);
    const std::uint64_t seed = 300 + static_cast<std::uint64_t>(s);

    const std::vector<gm::CounterFrame> none;
    const auto single_run = tr::fit(mc, tc, city.graph, train_frames, none, seed);
    std::vector<md::Model> one;
    one.push_back(md::Model::from_checkpoint(single_run.final_checkpoint, city.graph));
    const auto single_ens = tr::Ensemble::uniform(std::move(one));
    // Both scored with the single model's class weights.
    const auto weights = single_ens.member(0).data().class_weights;
    auto score = [&](const tr::Ensemble& ens) {
      std::vector<Mat> preds;
      for (const auto& f : val_frames) preds.push_back(ens.predict(f));
      return tr::evaluate_predictions(preds, val_frames, md::Task::congestion, weights).score;
    };
    const double single = score(single_ens);
    const auto runs = tr::train_kfold(mc, tc, city.graph, train_frames, 5, seed);
    const double folds = score(tr::ensemble_from_runs(runs, city.graph));
    single_total += single;
    folds_total += folds;
    per_seed += fmt(" %.4f", single) + fmt("->%.4f", folds);
  }
  const double single_mean = single_total / kAblationSeeds, folds_mean = folds_total / kAblationSeeds;
  const double improvement = single_mean - folds_mean;
  report(6, "ablation direction", improvement >= 0.0,
         fmt("validation CE single %.4f", single_mean) + fmt(" vs 5-fold %.4f", folds_mean) +
             fmt(", mean improvement %.4f (need >= 0); per seed", improvement) + per_seed + ", " +
             fmt("%.1f s", seconds_since(t0)));
}

// ------------------------------------------------------------ criterion 7

void oracle_equivalences() {
  std::mt19937_64 rng(10);
  double agg = 0.0, mm = 0.0, adam = 0.0, attn = 0.0, perm = 0.0;
  const auto g = toy_graph();
  std::vector<std::vector<Index>> members;
  for (const auto& s : g.supersegments()) members.push_back(s.edges);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat f = random_matrix(8, 7, rng);
    agg = std::max(agg, (gm::aggregate_by_supersegment(g.edge_incidence(), f) - member_sum_oracle(members, f))
                            .cwiseAbs()
                            .maxCoeff());
    const Mat a = random_matrix(9, 6, rng), b = random_matrix(6, 5, rng);
    Tape t;
    mm = std::max(mm, (nx::matmul(t.constant(a), t.constant(b)).value() - matmul_oracle(a, b)).cwiseAbs().maxCoeff());
  }
  {
    const Mat theta0 = random_matrix(4, 4, rng), grad = random_matrix(4, 4, rng);
    Mat theta = theta0;
    tr::OptimizerState s;
    Mat* ps[] = {&theta};
    const Mat* gs[] = {&grad};
    tr::adamw_step(ps, gs, s);
    // First step: m_hat = g, v_hat = g^2.
    const Mat expected =
        (theta0.array() - s.lr * (grad.array() / (grad.array().abs() + s.eps) + s.weight_decay * theta0.array())).matrix();
    adam = (theta - expected).cwiseAbs().maxCoeff();
  }
  {
    const Mat ve = en::encode_edge_explicit(g);
    en::ParameterStore store;
    nx::Rng init(11);
    en::GatLayer gat(store, "gat", {4, 5, ve.cols(), 2, 0.2}, init);
    const Mat h = random_matrix(6, 4, rng);
    const auto topo = en::make_topology(g);
    Tape t;
    const auto out = gat.forward(t, t.constant(h), topo, t.constant(ve));
    for (const auto& alpha : out.alpha) {
      std::vector<double> total(6, 0.0);
      for (std::size_t k = 0; k < topo.dst.size(); ++k) {
        total[static_cast<std::size_t>(topo.dst[k])] += alpha.value()(static_cast<Index>(k), 0);
      }
      for (double s : total) attn = std::max(attn, std::abs(s - 1.0));
    }
    const std::vector<Index> p{2, 5, 0, 4, 1, 3};
    std::vector<Index> tails, heads;
    for (const auto& e : g.edges()) {
      tails.push_back(p[static_cast<std::size_t>(e.tail)]);
      heads.push_back(p[static_cast<std::size_t>(e.head)]);
    }
    Mat hp(6, 4);
    for (Index i = 0; i < 6; ++i) hp.row(p[static_cast<std::size_t>(i)]) = h.row(i);
    const Mat moved = gat.forward(t, t.constant(hp), en::make_topology(6, tails, heads), t.constant(ve)).h.value();
    for (Index i = 0; i < 6; ++i) {
      perm = std::max(perm, (moved.row(p[static_cast<std::size_t>(i)]) - out.h.value().row(i)).cwiseAbs().maxCoeff());
    }
  }
  const bool ok = agg <= kOracleTol && mm <= kOracleTol && adam <= kOracleTol && attn <= kAttentionTol &&
                  perm <= kAttentionTol;
  report(7, "oracle equivalences", ok,
         fmt("aggregate %.2g, ", agg) + fmt("matmul %.2g, ", mm) + fmt("adamw %.2g (tol 1e-12); ", adam) +
             fmt("attention sums %.2g, ", attn) + fmt("permutation %.2g (tol 1e-10)", perm));
}

// ------------------------------------------------------------ criterion 8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "sparseflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = sparseflow::cli::run(static_cast<int>(argv.size()), argv.data(), out, err,
                                        [](const std::string&) { return std::nullopt; });
  if (code != 0) std::cerr << err.str();
  return code;
}

void train_determinism() {
  const fs::path root = fs::temp_directory_path() / "sparseflow_acceptance";
  fs::remove_all(root);
  const fs::path data = root / "data";
  bool ok = cli_run({"synth", "--nodes", "20", "--edges", "48", "--supersegments", "4", "--frames", "20", "--seed",
                     "3", "--out", data.string()}) == 0;
  const fs::path config = root / "run.cfg";
  {
    std::ofstream c(config);
    c << "manifest=data/manifest.txt\nepochs=3\nembed_dim=8\nhead_hidden1=16\nhead_hidden2=8\nfive_folds=true\n"
         "seed=42\n";
  }
  for (const char* name : {"a", "b"}) {
    ok = ok && cli_run({"train", "--config", config.string(), "--out", (root / name).string()}) == 0;
  }
  std::size_t compared = 0, differing = 0;
  if (ok) {
    for (const auto& entry : fs::directory_iterator(root / "a")) {
      const auto name = entry.path().filename().string();
      const bool artefact = entry.path().extension() == ".ckpt" || name.ends_with(".run.txt");
      if (!artefact) continue;
      ++compared;
      if (slurp(entry.path()) != slurp(root / "b" / name)) ++differing;
    }
  }
  report(8, "train determinism", ok && compared >= 10 && differing == 0,
         std::to_string(compared - differing) + "/" + std::to_string(compared) +
             " checkpoints and run records bit-identical across two runs");
  fs::remove_all(root);
}

// ------------------------------------------------------------ criterion 9

void serialization() {
  gm::SynthSpec spec;
  spec.nodes = 20;
  spec.edges = 48;
  spec.supersegments = 4;
  spec.frames = 4;
  const auto city = gm::generate_synthetic_city(spec, 12);
  const fs::path path = fs::temp_directory_path() / "sparseflow_acceptance.ckpt";
  int exact = 0, total = 0;
  for (auto task : {md::Task::congestion, md::Task::speed}) {
    md::ModelConfig mc;
    mc.task = task;
    mc.segment_conv = task == md::Task::speed;
    mc.embed_dim = 8;
    const md::Model m(mc, city.graph, md::fit_data_state(city.frames, task, sparseflow::kDefaultClipMax), 13);
    tr::save_checkpoint(m.to_checkpoint(), path);
    const md::Model back = md::Model::from_checkpoint(tr::load_checkpoint(path), city.graph);
    std::mt19937_64 rng(14);
    std::uniform_int_distribution<Index> node(0, spec.nodes - 1);
    for (int i = 0; i < kSerializationInputs / 2; ++i) {
      std::vector<Index> missing{node(rng), node(rng)};
      const auto f = random_frame(city.graph, rng, missing);
      const Mat a = m.predict(f), b = back.predict(f);
      ++total;
      if (a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0) {
        ++exact;
      }
    }
  }
  fs::remove(path);
  report(9, "serialization", exact == total && total == kSerializationInputs,
         std::to_string(exact) + "/" + std::to_string(total) + " forward outputs bit-identical after load(save)");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<void()>>> criteria{
      {1, gradient_integrity}, {2, merge_exactness},   {3, tvae_distinctness},
      {4, core_overfit},       {5, speed_overfit},     {6, ablation_direction},
      {7, oracle_equivalences}, {8, train_determinism}, {9, serialization}};
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, "criterion", false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
