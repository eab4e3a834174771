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

#include <filesystem>
#include <string>
#include <vector>

#include "sparseflow/numerics/tape.hpp"

namespace sparseflow::graphmodel {

using numerics::Index;
using Mat = numerics::Matrix<double>;

/// The seven raw per-edge attributes used for explicit edge features.
struct EdgeAttributes {
  double speed_kph = 0.0;
  double parsed_maxspeed = 0.0;
  double length_meters = 0.0;
  double counter_distance = 0.0;
  std::string importance;
  std::string highway;
  int oneway = 0;  // 0 or 1

  bool operator==(const EdgeAttributes&) const = default;
};

/// Directed edge tail -> head.
struct Edge {
  Index tail = 0;
  Index head = 0;

  bool operator==(const Edge&) const = default;
};

struct SuperSegment {
  std::vector<Index> nodes;
  std::vector<Index> edges;

  bool operator==(const SuperSegment&) const = default;
};

/// Immutable directed road graph with super-segments.
///
/// Invariants (checked on construction): endpoints < num_nodes, one attribute
/// record per edge, every super-segment has at least one node and one edge and
/// references only existing ids.
class RoadGraph {
 public:
  RoadGraph() = default;
  RoadGraph(Index num_nodes, std::vector<Edge> edges, std::vector<EdgeAttributes> attributes,
            std::vector<SuperSegment> supersegments);

  Index num_nodes() const { return num_nodes_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index num_supersegments() const { return static_cast<Index>(supersegments_.size()); }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<EdgeAttributes>& attributes() const { return attributes_; }
  const std::vector<SuperSegment>& supersegments() const { return supersegments_; }

  /// |S| x |V| 0/1 membership matrix.
  const Mat& node_incidence() const { return a_sv_; }
  /// |S| x |E| 0/1 membership matrix.
  const Mat& edge_incidence() const { return a_se_; }

  std::vector<Index> tails() const;
  std::vector<Index> heads() const;

  bool operator==(const RoadGraph& other) const;

 private:
  Index num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<EdgeAttributes> attributes_;
  std::vector<SuperSegment> supersegments_;
  Mat a_sv_;
  Mat a_se_;
};

/// Reads the line-oriented graph format:
///
///   nodes <|V|>
///   edge <u> <v> <speed_kph> <parsed_maxspeed> <length_meters> <counter_distance> <importance> <highway> <oneway>
///   ss <node ids...> | <edge ids...>
///
/// Blank lines and lines starting with '#' are skipped. Errors are DataError
/// with "path:line: message".
RoadGraph load_graph(const std::filesystem::path& path);
RoadGraph parse_graph(const std::string& text, const std::string& source = "<memory>");

void save_graph(const RoadGraph& graph, const std::filesystem::path& path);
std::string format_graph(const RoadGraph& graph);

/// Member-sum over rows of `features`: row s of the result is sum over j of
/// membership(s, j) * features.row(j).
Mat aggregate_by_supersegment(const Mat& membership, const Mat& features);

}  // namespace sparseflow::graphmodel
