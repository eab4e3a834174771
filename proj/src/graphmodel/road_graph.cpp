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

#include "sparseflow/graphmodel/road_graph.hpp"

#include <fstream>
#include <sstream>

#include "parse_util.hpp"
#include "sparseflow/errors.hpp"
#include "sparseflow/graphmodel/dataset.hpp"

namespace sparseflow::graphmodel {

RoadGraph::RoadGraph(Index num_nodes, std::vector<Edge> edges, std::vector<EdgeAttributes> attributes,
                     std::vector<SuperSegment> supersegments)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      attributes_(std::move(attributes)),
      supersegments_(std::move(supersegments)) {
  if (num_nodes_ <= 0) throw DataError("graph must have at least one node");
  if (attributes_.size() != edges_.size()) {
    throw DataError("edge attribute count " + std::to_string(attributes_.size()) + " != edge count " +
                    std::to_string(edges_.size()));
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.tail < 0 || e.tail >= num_nodes_ || e.head < 0 || e.head >= num_nodes_) {
      throw DataError("edge " + std::to_string(i) + " (" + std::to_string(e.tail) + "," + std::to_string(e.head) +
                      ") has a dangling endpoint; graph has " + std::to_string(num_nodes_) + " nodes");
    }
    if (attributes_[i].oneway != 0 && attributes_[i].oneway != 1) {
      throw DataError("edge " + std::to_string(i) + ": oneway must be 0 or 1");
    }
  }
  const Index n_s = num_supersegments();
  a_sv_ = Mat::Zero(n_s, num_nodes_);
  a_se_ = Mat::Zero(n_s, num_edges());
  for (Index s = 0; s < n_s; ++s) {
    const SuperSegment& seg = supersegments_[static_cast<std::size_t>(s)];
    if (seg.nodes.empty() || seg.edges.empty()) {
      throw DataError("super-segment " + std::to_string(s) + " is empty");
    }
    for (Index v : seg.nodes) {
      if (v < 0 || v >= num_nodes_) {
        throw DataError("super-segment " + std::to_string(s) + " references unknown node " + std::to_string(v));
      }
      a_sv_(s, v) = 1.0;
    }
    for (Index e : seg.edges) {
      if (e < 0 || e >= num_edges()) {
        throw DataError("super-segment " + std::to_string(s) + " references unknown edge " + std::to_string(e));
      }
      a_se_(s, e) = 1.0;
    }
  }
}

std::vector<Index> RoadGraph::tails() const {
  std::vector<Index> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back(e.tail);
  return out;
}

std::vector<Index> RoadGraph::heads() const {
  std::vector<Index> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back(e.head);
  return out;
}

bool RoadGraph::operator==(const RoadGraph& other) const {
  return num_nodes_ == other.num_nodes_ && edges_ == other.edges_ && attributes_ == other.attributes_ &&
         supersegments_ == other.supersegments_;
}

RoadGraph parse_graph(const std::string& text, const std::string& source) {
  detail::LineReader reader(text, source);
  Index num_nodes = -1;
  std::vector<Edge> edges;
  std::vector<EdgeAttributes> attrs;
  std::vector<SuperSegment> segments;
  std::vector<std::size_t> segment_lines;
  std::vector<std::size_t> edge_lines;

  while (auto line = reader.next()) {
    const auto& tok = line->tokens;
    if (tok[0] == "nodes") {
      if (tok.size() != 2) reader.fail("expected 'nodes <count>'");
      if (num_nodes >= 0) reader.fail("duplicate 'nodes' header");
      num_nodes = reader.to_index(tok[1], "node count");
      if (num_nodes <= 0) reader.fail("node count must be positive");
    } else if (tok[0] == "edge") {
      if (num_nodes < 0) reader.fail("'edge' before 'nodes' header");
      if (tok.size() != 10) reader.fail("expected 9 fields after 'edge', got " + std::to_string(tok.size() - 1));
      Edge e{reader.to_index(tok[1], "tail"), reader.to_index(tok[2], "head")};
      if (e.tail < 0 || e.tail >= num_nodes || e.head < 0 || e.head >= num_nodes) {
        reader.fail("dangling edge endpoint (" + tok[1] + "," + tok[2] + "); graph has " +
                    std::to_string(num_nodes) + " nodes");
      }
      EdgeAttributes a;
      a.speed_kph = reader.to_double(tok[3], "speed_kph");
      a.parsed_maxspeed = reader.to_double(tok[4], "parsed_maxspeed");
      a.length_meters = reader.to_double(tok[5], "length_meters");
      a.counter_distance = reader.to_double(tok[6], "counter_distance");
      a.importance = tok[7];
      a.highway = tok[8];
      const Index oneway = reader.to_index(tok[9], "oneway");
      if (oneway != 0 && oneway != 1) reader.fail("oneway must be 0 or 1");
      a.oneway = static_cast<int>(oneway);
      edges.push_back(e);
      attrs.push_back(std::move(a));
      edge_lines.push_back(line->number);
    } else if (tok[0] == "ss") {
      SuperSegment seg;
      bool after_bar = false;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        if (tok[i] == "|") {
          if (after_bar) reader.fail("super-segment has more than one '|'");
          after_bar = true;
          continue;
        }
        const Index id = reader.to_index(tok[i], after_bar ? "edge id" : "node id");
        (after_bar ? seg.edges : seg.nodes).push_back(id);
      }
      if (!after_bar) reader.fail("super-segment line needs '<nodes> | <edges>'");
      if (seg.nodes.empty() || seg.edges.empty()) reader.fail("empty super-segment");
      for (Index v : seg.nodes) {
        if (num_nodes < 0 || v < 0 || v >= num_nodes) reader.fail("super-segment references unknown node " + std::to_string(v));
      }
      segments.push_back(std::move(seg));
      segment_lines.push_back(line->number);
    } else {
      reader.fail("unknown record '" + tok[0] + "'");
    }
  }
  if (num_nodes < 0) throw DataError(source + ": missing 'nodes' header");
  // Edge ids may be referenced before all edges are read, so check them last.
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (Index e : segments[s].edges) {
      if (e < 0 || e >= static_cast<Index>(edges.size())) {
        throw DataError(source + ":" + std::to_string(segment_lines[s]) + ": super-segment references unknown edge " +
                        std::to_string(e));
      }
    }
  }
  try {
    return RoadGraph(num_nodes, std::move(edges), std::move(attrs), std::move(segments));
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

RoadGraph load_graph(const std::filesystem::path& path) {
  return parse_graph(detail::read_file(path), path.string());
}

std::string format_graph(const RoadGraph& graph) {
  std::ostringstream os;
  os << "nodes " << graph.num_nodes() << '\n';
  for (std::size_t i = 0; i < graph.edges().size(); ++i) {
    const Edge& e = graph.edges()[i];
    const EdgeAttributes& a = graph.attributes()[i];
    os << "edge " << e.tail << ' ' << e.head << ' ' << format_double(a.speed_kph) << ' '
       << format_double(a.parsed_maxspeed) << ' ' << format_double(a.length_meters) << ' '
       << format_double(a.counter_distance) << ' ' << a.importance << ' ' << a.highway << ' ' << a.oneway << '\n';
  }
  for (const auto& seg : graph.supersegments()) {
    os << "ss";
    for (Index v : seg.nodes) os << ' ' << v;
    os << " |";
    for (Index e : seg.edges) os << ' ' << e;
    os << '\n';
  }
  return os.str();
}

void save_graph(const RoadGraph& graph, const std::filesystem::path& path) {
  detail::write_file(path, format_graph(graph));
}

Mat aggregate_by_supersegment(const Mat& membership, const Mat& features) {
  if (membership.cols() != features.rows()) {
    throw ShapeError("aggregate_by_supersegment: membership has " + std::to_string(membership.cols()) +
                     " columns but features have " + std::to_string(features.rows()) + " rows");
  }
  return membership * features;
}

}  // namespace sparseflow::graphmodel
