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

#include "sparseflow/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "sparseflow/errors.hpp"
#include "sparseflow/graphmodel/synthetic.hpp"
#include "sparseflow/preprocess.hpp"

namespace sparseflow::cli {

namespace fs = std::filesystem;
using graphmodel::CounterFrame;
using graphmodel::format_double;
using graphmodel::RoadGraph;

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

const std::vector<std::string> kPathKeys{"graph", "frames", "manifest", "out"};

std::string env_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char c : key) out += c == '_' ? '-' : c;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError(dir.string() + ": cannot create output directory");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, v] : model::ModelConfig{}.to_key_values()) keys.push_back(k);
  for (const auto& [k, v] : train::TrainConfig{}.to_key_values()) keys.push_back(k);
  keys.insert(keys.end(), kPathKeys.begin(), kPathKeys.end());
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::map<std::string, std::string> RunConfig::to_key_values() const {
  auto kv = model.to_key_values();
  for (const auto& [k, v] : train.to_key_values()) kv[k] = v;
  kv["graph"] = graph.string();
  kv["frames"] = frames.string();
  kv["manifest"] = manifest.string();
  kv["out"] = out.string();
  return kv;
}

RunConfig resolve_run_config(const std::map<std::string, std::string>& file, const EnvLookup& env,
                             const std::map<std::string, std::string>& flags) {
  const auto keys = config_keys();
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto* layer : {&file, &flags}) {
    for (const auto& [k, v] : *layer) {
      if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }
  std::map<std::string, std::string> merged = file;
  for (const auto& k : keys) {
    if (auto v = env(env_name(k))) merged[k] = *v;
  }
  for (const auto& [k, v] : flags) merged[k] = v;

  RunConfig c;
  c.model = model::ModelConfig::from_key_values(merged);
  c.model.validate();
  c.train = train::TrainConfig::from_key_values(merged, train::TrainConfig::defaults_for(c.model.task));
  c.train.validate();
  auto path = [&](const char* key) -> fs::path {
    auto it = merged.find(key);
    return it == merged.end() ? fs::path() : fs::path(it->second);
  };
  c.graph = path("graph");
  c.frames = path("frames");
  c.manifest = path("manifest");
  c.out = merged.count("out") && !merged["out"].empty() ? path("out") : fs::path(kDefaultOut);
  return c;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::map<std::string, std::string> kv;
  try {
    kv = graphmodel::parse_key_values(read_text(path), path.string());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  for (const auto& k : kPathKeys) {
    auto it = kv.find(k);
    if (it != kv.end() && !it->second.empty() && fs::path(it->second).is_relative()) {
      it->second = (path.parent_path() / it->second).string();
    }
  }
  return kv;
}

std::string format_key_values(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

namespace {

// ---------------------------------------------------------------- data

struct Dataset {
  RoadGraph graph;
  std::vector<CounterFrame> frames;
};

Dataset load_dataset(const fs::path& manifest, const fs::path& graph_path, const fs::path& frames_path) {
  fs::path g = graph_path, f = frames_path;
  if (!manifest.empty()) {
    const auto m = graphmodel::load_manifest(manifest);
    if (g.empty()) g = m.graph;
    if (f.empty()) f = m.frames;
  }
  if (g.empty()) throw ConfigError("no graph given (use --manifest or --graph)");
  Dataset d{graphmodel::load_graph(g), {}};
  if (!f.empty()) d.frames = graphmodel::load_frames(f, d.graph);
  return d;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  graphmodel::SynthSpec spec;
  std::uint64_t seed = 0;
  bool resample_mask = false;
  std::string out;
};

int cmd_synth(const SynthArgs& a, const EnvLookup& env, std::ostream& out) {
  graphmodel::SynthSpec spec = a.spec;
  spec.fixed_mask = !a.resample_mask;
  const auto city = graphmodel::generate_synthetic_city(spec, a.seed);
  fs::path dir = a.out;
  if (dir.empty()) dir = env(std::string(kEnvPrefix) + "OUT").value_or(kDefaultOut);
  make_dir(dir);
  graphmodel::save_graph(city.graph, dir / "graph.txt");
  graphmodel::save_frames(city.frames, dir / "frames.txt");

  graphmodel::DatasetManifest m;
  m.city = "synthetic";
  m.graph = "graph.txt";
  m.frames = "frames.txt";
  m.label_kind = graphmodel::LabelKind::congestion;
  m.stats = preprocess::fit_stats(city.frames);
  m.extra = {{"synth.nodes", std::to_string(spec.nodes)},
             {"synth.edges", std::to_string(spec.edges)},
             {"synth.supersegments", std::to_string(spec.supersegments)},
             {"synth.frames", std::to_string(spec.frames)},
             {"synth.missing", format_double(spec.missing_fraction)},
             {"synth.fixed_mask", spec.fixed_mask ? "true" : "false"},
             {"synth.per_cell_missing", spec.per_cell_missing ? "true" : "false"},
             {"synth.unlabeled", format_double(spec.unlabeled_fraction)},
             {"synth.seed", std::to_string(a.seed)}};
  graphmodel::save_manifest(m, dir / "manifest.txt");

  std::array<double, 3> counts{};
  double labelled = 0.0;
  for (const auto& f : city.frames) {
    for (int c : f.congestion) {
      if (c < 0) continue;
      counts[static_cast<std::size_t>(c)] += 1.0;
      labelled += 1.0;
    }
  }
  out << "nodes " << city.graph.num_nodes() << "\n"
      << "edges " << city.graph.num_edges() << "\n"
      << "supersegments " << city.graph.num_supersegments() << "\n"
      << "frames " << city.frames.size() << "\n"
      << "class_ratio " << format_double(counts[0] / labelled) << " " << format_double(counts[1] / labelled) << " "
      << format_double(counts[2] / labelled) << "\n"
      << "wrote " << (dir / "manifest.txt").string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const Dataset data = load_dataset(rc.manifest, rc.graph, rc.frames);
  if (data.frames.empty()) throw DataError("no frames to train on");
  make_dir(rc.out);

  auto resolved = rc.to_key_values();
  for (const auto& k : kPathKeys) {
    if (!resolved[k].empty()) resolved[k] = fs::absolute(resolved[k]).lexically_normal().string();
  }
  write_text(rc.out / "run_config.txt", format_key_values(resolved));

  const auto runs = train::train(rc.model, rc.train, data.graph, data.frames);

  std::string members;
  for (const auto& r : runs) {
    const std::string stem = r.record.fold < 0 ? "model" : "fold" + std::to_string(r.record.fold);
    train::RunRecord record = r.record;
    for (std::size_t j = 0; j < r.members.size(); ++j) {
      const std::string name = r.members.size() == 1 ? stem + ".ckpt" : stem + ".m" + std::to_string(j) + ".ckpt";
      train::save_checkpoint(r.members[j], rc.out / name);
      members += name + "\n";
      record.checkpoint_paths.push_back(name);
    }
    write_text(rc.out / (stem + ".run.txt"), train::format_run_record(record));
    const auto& last = r.record.epochs.back();
    out << stem << " epochs " << last.epoch << " train " << format_double(last.train) << " val "
        << format_double(last.val) << " score " << format_double(r.record.validation_score) << "\n";
  }
  write_text(rc.out / "members.txt", members);

  const auto ensemble = train::ensemble_from_runs(runs, data.graph);
  const auto eval = train::evaluate(ensemble, data.frames);
  write_text(rc.out / "evaluation.txt", train::format_evaluation(eval));
  out << "averaged over " << ensemble.size() << " model(s), full dataset score " << format_double(eval.score)
      << "\nwrote " << rc.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- predict / eval

struct ModelArgs {
  std::vector<std::string> checkpoints;
  std::string members;
  std::string manifest, graph, frames;
  bool ensemble = false;
  std::vector<double> scores;
  bool higher_is_better = false;
  std::string rule = "inverse";
  double tau = 1.0;
};

std::vector<fs::path> checkpoint_list(const ModelArgs& a) {
  std::vector<fs::path> paths(a.checkpoints.begin(), a.checkpoints.end());
  if (!a.members.empty()) {
    const fs::path list(a.members);
    std::istringstream in(read_text(list));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      paths.push_back(list.parent_path() / line);
    }
  }
  if (paths.empty()) throw ConfigError("no checkpoints given (use --checkpoint or --members)");
  return paths;
}

train::Ensemble build_ensemble(const ModelArgs& a, const RoadGraph& graph) {
  const auto paths = checkpoint_list(a);
  std::vector<model::Model> models;
  for (const auto& p : paths) models.push_back(model::Model::from_checkpoint(train::load_checkpoint(p), graph));
  if (!a.ensemble) return train::Ensemble::uniform(std::move(models));
  if (a.scores.size() != models.size()) {
    throw ConfigError("--ensemble needs one --scores value per checkpoint (" + std::to_string(models.size()) +
                      " checkpoints, " + std::to_string(a.scores.size()) + " scores)");
  }
  std::vector<double> w;
  try {
    w = train::ensemble_weights(a.scores, !a.higher_is_better, train::parse_ensemble_rule(a.rule), a.tau);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return train::Ensemble(std::move(models), std::move(w));
}

int cmd_predict(const ModelArgs& a, const std::string& out_path, const EnvLookup& env, std::ostream& out) {
  const Dataset data = load_dataset(a.manifest, a.graph, a.frames);
  if (data.frames.empty()) throw DataError("no frames to predict");
  const auto ens = build_ensemble(a, data.graph);
  std::ostringstream os;
  os << "# task " << model::to_string(ens.task()) << "\n# models " << ens.size() << "\n";
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    const graphmodel::Mat p = ens.predict(data.frames[f]);
    os << "frame " << f << "\n";
    for (graphmodel::Index i = 0; i < p.rows(); ++i) {
      for (graphmodel::Index j = 0; j < p.cols(); ++j) os << (j ? " " : "") << format_double(p(i, j));
      os << "\n";
    }
  }
  fs::path target = out_path;
  if (target.empty()) {
    const fs::path dir = env(std::string(kEnvPrefix) + "OUT").value_or(kDefaultOut);
    make_dir(dir);
    target = dir / "predictions.txt";
  }
  write_text(target, os.str());
  out << "wrote " << target.string() << " (" << data.frames.size() << " frames)\n";
  return kOk;
}

int cmd_eval(const ModelArgs& a, std::ostream& out) {
  const Dataset data = load_dataset(a.manifest, a.graph, a.frames);
  if (data.frames.empty()) throw DataError("no frames to evaluate");
  const auto ens = build_ensemble(a, data.graph);
  out << "models " << ens.size() << "\n" << train::format_evaluation(train::evaluate(ens, data.frames));
  return kOk;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const std::string& manifest, const std::string& graph, const std::string& frames,
                const std::string& checkpoint, std::ostream& out) {
  if (manifest.empty() && graph.empty() && checkpoint.empty()) {
    throw ConfigError("inspect needs --manifest, --graph or --checkpoint");
  }
  if (!manifest.empty() || !graph.empty()) {
    const Dataset d = load_dataset(manifest, graph, frames);
    out << "nodes " << d.graph.num_nodes() << "\nedges " << d.graph.num_edges() << "\nsupersegments "
        << d.graph.num_supersegments() << "\n";
    if (!d.frames.empty()) {
      double observed = 0.0, cells = 0.0, labelled = 0.0;
      std::array<double, 3> classes{};
      std::vector<double> speeds;
      for (const auto& f : d.frames) {
        observed += f.mask.sum();
        cells += static_cast<double>(f.mask.size());
        for (int c : f.congestion) {
          if (c >= 0) {
            classes[static_cast<std::size_t>(c)] += 1.0;
            labelled += 1.0;
          }
        }
        for (double s : f.speed) {
          if (std::isfinite(s)) speeds.push_back(s);
        }
      }
      out << "frames " << d.frames.size() << "\nmissing_fraction " << format_double(1.0 - observed / cells) << "\n";
      if (labelled > 0) {
        out << "class_ratio " << format_double(classes[0] / labelled) << " " << format_double(classes[1] / labelled)
            << " " << format_double(classes[2] / labelled) << "\n";
      }
      if (!speeds.empty()) {
        double mean = 0.0, var = 0.0;
        for (double s : speeds) mean += s;
        mean /= static_cast<double>(speeds.size());
        for (double s : speeds) var += (s - mean) * (s - mean);
        out << "speed_mean " << format_double(mean) << "\nspeed_std "
            << format_double(std::sqrt(var / static_cast<double>(speeds.size()))) << "\n";
      }
      const auto stats = preprocess::fit_stats(d.frames);
      out << "counts_mean " << format_double(stats.mean) << "\ncounts_std " << format_double(stats.std)
          << "\ncounts_min " << format_double(stats.min) << "\ncounts_max " << format_double(stats.max) << "\n";
    }
  }
  if (!checkpoint.empty()) {
    const auto c = train::load_checkpoint(checkpoint);
    std::size_t scalars = 0;
    for (const auto& t : c.tensors) scalars += static_cast<std::size_t>(t.value.size());
    out << "checkpoint " << checkpoint << "\ntensors " << c.tensors.size() << "\nparameters " << scalars << "\n";
    for (const auto& [k, v] : c.meta) {
      if (k != "encoder.edge_features") out << "meta " << k << " " << v << "\n";
    }
  }
  return kOk;
}

template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << "\n";
    return kNumericFault;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataFault;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataFault;
  } catch (const ContractError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataFault;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataFault;
  }
}

void add_model_args(CLI::App& cmd, ModelArgs& a) {
  cmd.add_option("--checkpoint", a.checkpoints, "Checkpoint file (repeatable; several are averaged)");
  cmd.add_option("--members", a.members, "File listing checkpoints, as written by train");
  cmd.add_option("--manifest", a.manifest, "Dataset manifest");
  cmd.add_option("--graph", a.graph, "Graph file (overrides the manifest)");
  cmd.add_option("--frames", a.frames, "Frames file (overrides the manifest)");
  cmd.add_flag("--ensemble", a.ensemble, "Weight checkpoints by --scores instead of averaging uniformly");
  cmd.add_option("--scores", a.scores, "Validation score per checkpoint")->delimiter(',');
  cmd.add_flag("--higher-is-better", a.higher_is_better, "Scores grow with quality");
  cmd.add_option("--rule", a.rule, "Ensemble weighting: inverse or softmax");
  cmd.add_option("--tau", a.tau, "Softmax temperature");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Sparse counter reconstruction and road-graph traffic prediction"};
  app.name("sparseflow");
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic city dataset");
  synth->add_option("--nodes", synth_args.spec.nodes, "Node count");
  synth->add_option("--edges", synth_args.spec.edges, "Directed edge count");
  synth->add_option("--supersegments", synth_args.spec.supersegments, "Super-segment count");
  synth->add_option("--frames", synth_args.spec.frames, "Frame count");
  synth->add_option("--missing", synth_args.spec.missing_fraction, "Fraction of nodes without counters")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--unlabeled", synth_args.spec.unlabeled_fraction, "Fraction of unlabeled edges")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_flag("--resample-mask", synth_args.resample_mask, "Draw a new missing-node set per frame");
  synth->add_flag("--per-cell-missing", synth_args.spec.per_cell_missing, "Mask cells instead of whole nodes");
  synth->add_option("--seed", synth_args.seed, "Random seed");
  synth->add_option("--out", synth_args.out, "Output directory (default: $SPARSEFLOW_OUT or sparseflow_out)");

  auto* train_cmd = app.add_subcommand("train", "Train one model or k fold models");
  std::string config_path;
  train_cmd->add_option("--config", config_path, "key=value run config file");
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<std::string, CLI::Option*>> key_options;
  for (const auto& key : config_keys()) {
    auto* opt = train_cmd->add_option(flag_name(key), flag_values[key], "Overrides config key '" + key + "'");
    key_options.emplace_back(key, opt);
  }

  ModelArgs predict_args;
  std::string predict_out;
  auto* predict = app.add_subcommand("predict", "Write per-edge probabilities or per-segment speeds");
  add_model_args(*predict, predict_args);
  predict->add_option("--out", predict_out, "Prediction file (default: $SPARSEFLOW_OUT/predictions.txt)");

  ModelArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score checkpoints on labelled frames");
  add_model_args(*eval, eval_args);

  std::string ins_manifest, ins_graph, ins_frames, ins_checkpoint;
  auto* inspect = app.add_subcommand("inspect", "Print graph, dataset or checkpoint statistics");
  inspect->add_option("--manifest", ins_manifest, "Dataset manifest");
  inspect->add_option("--graph", ins_graph, "Graph file");
  inspect->add_option("--frames", ins_frames, "Frames file");
  inspect->add_option("--checkpoint", ins_checkpoint, "Checkpoint file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  if (*synth) return guarded([&] { return cmd_synth(synth_args, env, out); }, err);
  if (*train_cmd) {
    return guarded(
        [&] {
          std::map<std::string, std::string> file;
          if (!config_path.empty()) file = read_config_file(config_path);
          std::map<std::string, std::string> flags;
          for (const auto& [key, opt] : key_options) {
            if (opt->count() > 0) flags[key] = flag_values[key];
          }
          return cmd_train(resolve_run_config(file, env, flags), out);
        },
        err);
  }
  if (*predict) return guarded([&] { return cmd_predict(predict_args, predict_out, env, out); }, err);
  if (*eval) return guarded([&] { return cmd_eval(eval_args, out); }, err);
  if (*inspect) {
    return guarded([&] { return cmd_inspect(ins_manifest, ins_graph, ins_frames, ins_checkpoint, out); }, err);
  }
  return kUsage;
}

}  // namespace sparseflow::cli
