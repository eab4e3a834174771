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

#include "sparseflow/graphmodel/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <random>
#include <sstream>

#include "parse_util.hpp"
#include "sparseflow/errors.hpp"

namespace sparseflow::graphmodel {

std::string to_string(LabelKind kind) { return kind == LabelKind::congestion ? "congestion" : "speed"; }

LabelKind parse_label_kind(const std::string& text) {
  if (text == "congestion") return LabelKind::congestion;
  if (text == "speed") return LabelKind::speed;
  throw ConfigError("unknown label kind '" + text + "' (expected congestion|speed)");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw ContractError("format_double: conversion failed");
  return std::string(buf, ptr);
}

namespace {

bool same_bits_or_nan(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    if (std::isnan(x) != std::isnan(y)) return false;
    if (!std::isnan(x) && x != y) return false;
  }
  return true;
}

}  // namespace

bool CounterFrame::operator==(const CounterFrame& other) const {
  return same_bits_or_nan(counts, other.counts) && mask == other.mask && time == other.time &&
         congestion == other.congestion && speed == other.speed;
}

CounterFrame make_frame(Mat counts, TimeIndex time, std::vector<int> congestion, std::vector<double> speed) {
  CounterFrame f;
  f.mask = counts.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : 1.0; });
  f.counts = std::move(counts);
  f.time = time;
  f.congestion = std::move(congestion);
  f.speed = std::move(speed);
  return f;
}

void validate_frame(const CounterFrame& frame, const RoadGraph& graph, bool whole_node_missing) {
  if (frame.counts.rows() != graph.num_nodes() || frame.counts.cols() != kBinsPerSample) {
    throw DataError("frame counts must be " + std::to_string(graph.num_nodes()) + "x4");
  }
  if (frame.mask.rows() != frame.counts.rows() || frame.mask.cols() != frame.counts.cols()) {
    throw DataError("frame mask shape differs from counts");
  }
  if (frame.time.weekday < 0 || frame.time.weekday >= kDaysPerWeek) throw DataError("weekday out of range");
  if (frame.time.slot < 0 || frame.time.slot >= kSlotsPerDay) throw DataError("slot out of range");
  for (Index i = 0; i < frame.counts.rows(); ++i) {
    int missing = 0;
    for (Index k = 0; k < kBinsPerSample; ++k) {
      const double m = frame.mask(i, k);
      const bool nan = std::isnan(frame.counts(i, k));
      if (m != 0.0 && m != 1.0) throw DataError("mask values must be 0 or 1");
      if ((m == 0.0) != nan) throw DataError("mask disagrees with missing cells at node " + std::to_string(i));
      if (!nan && !std::isfinite(frame.counts(i, k))) throw DataError("non-finite count at node " + std::to_string(i));
      missing += nan ? 1 : 0;
    }
    if (whole_node_missing && missing != 0 && missing != kBinsPerSample) {
      throw DataError("node " + std::to_string(i) + " is partially missing");
    }
  }
  if (!frame.congestion.empty()) {
    if (static_cast<Index>(frame.congestion.size()) != graph.num_edges()) {
      throw DataError("congestion labels must have one entry per edge");
    }
    for (int c : frame.congestion) {
      if (c < -1 || c >= kCongestionClasses) throw DataError("congestion label out of range: " + std::to_string(c));
    }
  }
  if (!frame.speed.empty()) {
    if (static_cast<Index>(frame.speed.size()) != graph.num_supersegments()) {
      throw DataError("speed labels must have one entry per super-segment");
    }
    for (double s : frame.speed) {
      if (!std::isfinite(s)) throw DataError("non-finite speed label");
    }
  }
}

std::vector<CounterFrame> parse_frames(const std::string& text, const RoadGraph& graph, const std::string& source) {
  detail::LineReader reader(text, source);
  std::vector<CounterFrame> frames;
  auto line = reader.next();
  while (line) {
    const auto& tok = line->tokens;
    if (tok[0] != "frame" || tok.size() != 3) reader.fail("expected 'frame <weekday> <slot>'");
    const Index weekday = reader.to_index(tok[1], "weekday");
    const Index slot = reader.to_index(tok[2], "slot");
    if (weekday < 0 || weekday >= kDaysPerWeek) reader.fail("weekday must be in 0..6");
    if (slot < 0 || slot >= kSlotsPerDay) reader.fail("slot must be in 0..95");
    Mat counts(graph.num_nodes(), kBinsPerSample);
    for (Index i = 0; i < graph.num_nodes(); ++i) {
      auto row = reader.next();
      if (!row) reader.fail("frame truncated: expected " + std::to_string(graph.num_nodes()) + " counter rows");
      if (row->tokens.size() != kBinsPerSample) {
        reader.fail("counter row needs 4 values, got " + std::to_string(row->tokens.size()));
      }
      for (Index k = 0; k < kBinsPerSample; ++k) {
        counts(i, k) = reader.to_double(row->tokens[static_cast<std::size_t>(k)], "count", true);
      }
    }
    std::vector<int> congestion;
    std::vector<double> speed;
    line = reader.next();
    while (line && line->tokens[0] != "frame") {
      const auto& lt = line->tokens;
      if (lt[0] == "congestion") {
        if (static_cast<Index>(lt.size()) - 1 != graph.num_edges()) {
          reader.fail("congestion line needs " + std::to_string(graph.num_edges()) + " labels");
        }
        for (std::size_t i = 1; i < lt.size(); ++i) {
          const Index c = reader.to_index(lt[i], "congestion label");
          if (c < -1 || c >= kCongestionClasses) reader.fail("congestion label must be -1, 0, 1 or 2");
          congestion.push_back(static_cast<int>(c));
        }
      } else if (lt[0] == "speed") {
        if (static_cast<Index>(lt.size()) - 1 != graph.num_supersegments()) {
          reader.fail("speed line needs " + std::to_string(graph.num_supersegments()) + " labels");
        }
        for (std::size_t i = 1; i < lt.size(); ++i) speed.push_back(reader.to_double(lt[i], "speed label"));
      } else {
        reader.fail("unknown record '" + lt[0] + "' inside frame");
      }
      line = reader.next();
    }
    frames.push_back(make_frame(std::move(counts), TimeIndex{static_cast<int>(weekday), static_cast<int>(slot)},
                                std::move(congestion), std::move(speed)));
  }
  return frames;
}

std::vector<CounterFrame> load_frames(const std::filesystem::path& path, const RoadGraph& graph) {
  return parse_frames(detail::read_file(path), graph, path.string());
}

std::string format_frames(const std::vector<CounterFrame>& frames) {
  std::ostringstream os;
  for (const auto& f : frames) {
    os << "frame " << f.time.weekday << ' ' << f.time.slot << '\n';
    for (Index i = 0; i < f.counts.rows(); ++i) {
      for (Index k = 0; k < f.counts.cols(); ++k) {
        if (k) os << ' ';
        os << format_double(f.counts(i, k));
      }
      os << '\n';
    }
    if (!f.congestion.empty()) {
      os << "congestion";
      for (int c : f.congestion) os << ' ' << c;
      os << '\n';
    }
    if (!f.speed.empty()) {
      os << "speed";
      for (double s : f.speed) os << ' ' << format_double(s);
      os << '\n';
    }
  }
  return os.str();
}

void save_frames(const std::vector<CounterFrame>& frames, const std::filesystem::path& path) {
  detail::write_file(path, format_frames(frames));
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(source + ":" + std::to_string(number) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw DataError(source + ":" + std::to_string(number) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace {

double manifest_double(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& source) {
  const std::string& tok = kv.at(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw DataError(source + ": field '" + key + "': expected a number, got '" + tok + "'");
  }
  return v;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const std::string source = path.string();
  auto kv = parse_key_values(detail::read_file(path), source);
  const auto base = path.parent_path();
  DatasetManifest m;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    return v;
  };
  m.city = take("city").value_or("");
  if (auto g = take("graph")) m.graph = base / *g;
  if (auto f = take("frames")) m.frames = base / *f;
  if (auto k = take("label_kind")) {
    try {
      m.label_kind = parse_label_kind(*k);
    } catch (const ConfigError& e) {
      throw DataError(source + ": " + e.what());
    }
  }
  const bool has_stats = kv.count("stats.mean") != 0;
  if (has_stats) {
    for (const char* key : {"stats.mean", "stats.std", "stats.min", "stats.max"}) {
      if (!kv.count(key)) throw DataError(source + ": incomplete stats, missing '" + std::string(key) + "'");
    }
    NormStats s;
    s.mean = manifest_double(kv, "stats.mean", source);
    s.std = manifest_double(kv, "stats.std", source);
    s.min = manifest_double(kv, "stats.min", source);
    s.max = manifest_double(kv, "stats.max", source);
    if (kv.count("stats.clip_max")) s.clip_max = manifest_double(kv, "stats.clip_max", source);
    if (!(s.std > 0.0) || s.min > s.max) throw DataError(source + ": invalid normalisation stats");
    m.stats = s;
  }
  for (const auto& [k, v] : kv) {
    if (k == "city" || k == "graph" || k == "frames" || k == "label_kind" || k.rfind("stats.", 0) == 0) continue;
    m.extra[k] = v;
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "city=" << manifest.city << '\n';
  os << "graph=" << manifest.graph.string() << '\n';
  os << "frames=" << manifest.frames.string() << '\n';
  os << "label_kind=" << to_string(manifest.label_kind) << '\n';
  if (manifest.stats) {
    os << "stats.mean=" << format_double(manifest.stats->mean) << '\n';
    os << "stats.std=" << format_double(manifest.stats->std) << '\n';
    os << "stats.min=" << format_double(manifest.stats->min) << '\n';
    os << "stats.max=" << format_double(manifest.stats->max) << '\n';
    os << "stats.clip_max=" << format_double(manifest.stats->clip_max) << '\n';
  }
  for (const auto& [k, v] : manifest.extra) os << k << '=' << v << '\n';
  detail::write_file(path, os.str());
}

std::vector<Fold> kfold_split(std::size_t n_samples, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ContractError("kfold_split: k must be positive");
  if (n_samples < k) {
    throw ContractError("kfold_split: " + std::to_string(n_samples) + " samples cannot fill " + std::to_string(k) +
                        " folds");
  }
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with our own index draw so the permutation is library-independent.
  for (std::size_t i = n_samples; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Fold> folds(k);
  const std::size_t base = n_samples / k, extra = n_samples % k;
  std::size_t offset = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].holdout.assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                            order.begin() + static_cast<std::ptrdiff_t>(offset + size));
    std::sort(folds[f].holdout.begin(), folds[f].holdout.end());
    offset += size;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].holdout.begin(), folds[g].holdout.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

}  // namespace sparseflow::graphmodel
