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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparseflow/graphmodel/road_graph.hpp"
#include "sparseflow/norm_stats.hpp"

namespace sparseflow::graphmodel {

inline constexpr int kBinsPerSample = 4;
inline constexpr int kDaysPerWeek = 7;
inline constexpr int kSlotsPerDay = 96;

enum class Congestion : int { unlabeled = -1, red = 0, yellow = 1, green = 2 };
inline constexpr int kCongestionClasses = 3;

enum class LabelKind { congestion, speed };

std::string to_string(LabelKind kind);
LabelKind parse_label_kind(const std::string& text);

struct TimeIndex {
  int weekday = 0;  // 0 = Monday
  int slot = 0;     // 15-minute bin of the day

  bool operator==(const TimeIndex&) const = default;
};

/// One sample: the last hour of loop counters for every node.
struct CounterFrame {
  Mat counts;  // |V| x 4, NaN where missing
  Mat mask;    // |V| x 4, 1 observed / 0 missing
  TimeIndex time;
  std::vector<int> congestion;  // per edge, Congestion values; empty if absent
  std::vector<double> speed;    // per super-segment; empty if absent

  bool operator==(const CounterFrame& other) const;
};

/// Builds a frame, deriving the mask from NaN cells.
CounterFrame make_frame(Mat counts, TimeIndex time, std::vector<int> congestion = {},
                        std::vector<double> speed = {});

/// Checks the frame against the graph: shapes, mask/NaN agreement, time range,
/// label lengths and values. With `whole_node_missing` a node must be either
/// fully observed or fully missing.
void validate_frame(const CounterFrame& frame, const RoadGraph& graph, bool whole_node_missing = false);

/// Frames file format, one block per sample:
///
///   frame <weekday> <slot>
///   <|V| lines of 4 values, NaN for missing>
///   congestion <|E| ints, -1 unlabeled>     (optional)
///   speed <|S| values>                      (optional)
std::vector<CounterFrame> load_frames(const std::filesystem::path& path, const RoadGraph& graph);
std::vector<CounterFrame> parse_frames(const std::string& text, const RoadGraph& graph,
                                       const std::string& source = "<memory>");
void save_frames(const std::vector<CounterFrame>& frames, const std::filesystem::path& path);
std::string format_frames(const std::vector<CounterFrame>& frames);

/// key=value dataset description.
struct DatasetManifest {
  std::string city;
  std::filesystem::path graph;
  std::filesystem::path frames;
  LabelKind label_kind = LabelKind::congestion;
  std::optional<NormStats> stats;
  std::map<std::string, std::string> extra;
};

/// Parses key=value lines; '#' starts a comment line. Paths are resolved
/// relative to the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Generic key=value reader shared by manifests and run configs.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& source);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> holdout;
};

/// Seeded shuffle, then k contiguous holdouts whose sizes differ by at most
/// one (the first n % k holdouts get the extra element).
std::vector<Fold> kfold_split(std::size_t n_samples, std::size_t k, std::uint64_t seed);

std::string format_double(double v);

}  // namespace sparseflow::graphmodel
