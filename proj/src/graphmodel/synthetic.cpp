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

#include "sparseflow/graphmodel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "sparseflow/errors.hpp"

namespace sparseflow::graphmodel {

namespace {

struct RoadClass {
  const char* highway;
  const char* importance;
  double speed;
};

constexpr std::array<RoadClass, 4> kRoadClasses{{
    {"primary", "3", 80.0},
    {"secondary", "2", 60.0},
    {"tertiary", "1", 50.0},
    {"residential", "0", 30.0},
}};

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

double synthetic_demand(int weekday, int slot) {
  const double hour = static_cast<double>(slot) / 4.0;
  const double morning = std::exp(-(hour - 8.0) * (hour - 8.0) / (2.0 * 1.2 * 1.2));
  const double evening = 0.9 * std::exp(-(hour - 17.5) * (hour - 17.5) / (2.0 * 1.5 * 1.5));
  const double daily = 0.15 + 0.85 * std::min(1.0, morning + evening);
  const double weekly = weekday < 5 ? 1.0 : 0.55;
  return daily * weekly;
}

SyntheticCity generate_synthetic_city(const SynthSpec& spec, std::uint64_t seed) {
  const Index n_v = spec.nodes, n_e = spec.edges, n_s = spec.supersegments;
  if (n_v < 2) throw ContractError("synthetic city needs at least 2 nodes");
  if (n_e < n_v - 1) throw ContractError("infeasible city: |E| < |V|-1 cannot connect the graph");
  if (n_e > n_v * (n_v - 1)) throw ContractError("infeasible city: |E| exceeds |V|(|V|-1) directed pairs");
  if (n_s < 1) throw ContractError("synthetic city needs at least one super-segment");
  if (spec.frames < 1) throw ContractError("synthetic city needs at least one frame");
  if (!(spec.missing_fraction >= 0.0 && spec.missing_fraction <= 1.0)) {
    throw ContractError("missing fraction must lie in [0,1]");
  }
  std::mt19937_64 rng(seed);

  // Topology.
  std::vector<Edge> edges;
  std::set<std::pair<Index, Index>> present;
  auto add_edge = [&](Index u, Index v) {
    if (u == v || present.count({u, v})) return false;
    present.insert({u, v});
    edges.push_back({u, v});
    return true;
  };
  for (Index i = 1; i < n_v; ++i) {
    const auto j = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(i)));
    if (rng() % 2 == 0) {
      add_edge(i, j);
    } else {
      add_edge(j, i);
    }
  }
  while (static_cast<Index>(edges.size()) < n_e) {
    if (rng() % 2 == 0) {
      const Edge e = edges[uniform_index(rng, edges.size())];
      if (add_edge(e.head, e.tail)) continue;
    }
    const auto u = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n_v)));
    const auto v = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n_v)));
    add_edge(u, v);
  }

  std::vector<EdgeAttributes> attrs(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const RoadClass& rc = kRoadClasses[uniform_index(rng, kRoadClasses.size())];
    EdgeAttributes& a = attrs[i];
    a.highway = rc.highway;
    a.importance = rc.importance;
    a.parsed_maxspeed = rc.speed;
    a.speed_kph = std::round(rc.speed * uniform(rng, 0.85, 1.1) * 10.0) / 10.0;
    a.length_meters = std::round(uniform(rng, 50.0, 800.0));
    a.counter_distance = static_cast<double>(uniform_index(rng, 5));
    a.oneway = present.count({edges[i].head, edges[i].tail}) ? 0 : 1;
  }

  // Super-segments as short directed walks.
  std::vector<std::vector<std::size_t>> out_edges(static_cast<std::size_t>(n_v));
  for (std::size_t i = 0; i < edges.size(); ++i) out_edges[static_cast<std::size_t>(edges[i].tail)].push_back(i);
  std::vector<Index> starts;
  for (Index v = 0; v < n_v; ++v) {
    if (!out_edges[static_cast<std::size_t>(v)].empty()) starts.push_back(v);
  }
  std::vector<SuperSegment> segments;
  for (Index s = 0; s < n_s; ++s) {
    SuperSegment seg;
    Index cur = starts[uniform_index(rng, starts.size())];
    seg.nodes.push_back(cur);
    const std::size_t length = 2 + uniform_index(rng, 4);
    for (std::size_t step = 0; step < length; ++step) {
      std::vector<std::size_t> options;
      for (std::size_t e : out_edges[static_cast<std::size_t>(cur)]) {
        const Index next = edges[e].head;
        if (std::find(seg.nodes.begin(), seg.nodes.end(), next) == seg.nodes.end()) options.push_back(e);
      }
      if (options.empty()) break;
      const std::size_t e = options[uniform_index(rng, options.size())];
      seg.edges.push_back(static_cast<Index>(e));
      cur = edges[e].head;
      seg.nodes.push_back(cur);
    }
    if (seg.edges.empty()) {
      // Dead end right away: fall back to the start node's first out-edge.
      const std::size_t e = out_edges[static_cast<std::size_t>(seg.nodes.front())].front();
      seg.edges.push_back(static_cast<Index>(e));
      seg.nodes.push_back(edges[e].head);
    }
    segments.push_back(std::move(seg));
  }

  // Latent process parameters.
  std::vector<double> sensitivity(edges.size());
  for (auto& s : sensitivity) s = uniform(rng, 0.2, 1.0);
  std::vector<double> base_flow(static_cast<std::size_t>(n_v));
  for (auto& b : base_flow) b = uniform(rng, 20.0, 150.0);

  const std::size_t n_missing =
      spec.per_cell_missing
          ? 0
          : static_cast<std::size_t>(std::ceil(spec.missing_fraction * static_cast<double>(n_v) - 1e-9));
  auto draw_missing_nodes = [&]() {
    std::vector<Index> ids(static_cast<std::size_t>(n_v));
    std::iota(ids.begin(), ids.end(), Index{0});
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[uniform_index(rng, i)]);
    std::vector<bool> missing(static_cast<std::size_t>(n_v), false);
    for (std::size_t i = 0; i < n_missing; ++i) missing[static_cast<std::size_t>(ids[i])] = true;
    return missing;
  };
  const std::vector<bool> fixed_missing = draw_missing_nodes();

  SyntheticCity city;
  city.speed_ratio.resize(spec.frames);
  std::vector<double> all_ratios;
  std::vector<CounterFrame> frames;
  std::normal_distribution<double> fluctuation(0.0, 0.05);
  const int week_slots = kDaysPerWeek * kSlotsPerDay;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const TimeIndex t{static_cast<int>(uniform_index(rng, kDaysPerWeek)),
                      static_cast<int>(uniform_index(rng, kSlotsPerDay))};
    const double xi = fluctuation(rng);
    const double demand_now = synthetic_demand(t.weekday, t.slot) * (1.0 + xi);

    auto& ratio = city.speed_ratio[f];
    ratio.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double level = std::clamp(sensitivity[e] * demand_now, 0.0, 0.95);
      ratio[e] = 1.0 - 0.7 * level;
      all_ratios.push_back(ratio[e]);
    }

    const std::vector<bool> missing = spec.fixed_mask ? fixed_missing : draw_missing_nodes();
    Mat counts(n_v, kBinsPerSample);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Index v = 0; v < n_v; ++v) {
      for (int k = 0; k < kBinsPerSample; ++k) {
        const int global = ((t.weekday * kSlotsPerDay + t.slot - kBinsPerSample + k) % week_slots + week_slots) %
                           week_slots;
        const double lambda = base_flow[static_cast<std::size_t>(v)] *
                              synthetic_demand(global / kSlotsPerDay, global % kSlotsPerDay) * (1.0 + xi);
        const double draw = static_cast<double>(std::poisson_distribution<long>(lambda)(rng));
        bool is_missing = missing[static_cast<std::size_t>(v)];
        if (spec.per_cell_missing) is_missing = uniform(rng, 0.0, 1.0) < spec.missing_fraction;
        counts(v, k) = is_missing ? nan : draw;
      }
    }
    frames.push_back(make_frame(std::move(counts), t));
  }

  city.thresholds = {quantile(all_ratios, spec.class_ratio[0]),
                     quantile(all_ratios, spec.class_ratio[0] + spec.class_ratio[1])};
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& ratio = city.speed_ratio[f];
    auto& labels = frames[f].congestion;
    labels.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (ratio[e] < city.thresholds[0]) {
        labels[e] = static_cast<int>(Congestion::red);
      } else if (ratio[e] < city.thresholds[1]) {
        labels[e] = static_cast<int>(Congestion::yellow);
      } else {
        labels[e] = static_cast<int>(Congestion::green);
      }
      if (spec.unlabeled_fraction > 0.0 && uniform(rng, 0.0, 1.0) < spec.unlabeled_fraction) {
        labels[e] = static_cast<int>(Congestion::unlabeled);
      }
    }
    auto& speed = frames[f].speed;
    for (const auto& seg : segments) {
      double num = 0.0, den = 0.0;
      for (Index e : seg.edges) {
        const auto ei = static_cast<std::size_t>(e);
        num += attrs[ei].length_meters * attrs[ei].speed_kph * ratio[ei];
        den += attrs[ei].length_meters;
      }
      speed.push_back(num / den);
    }
  }

  city.graph = RoadGraph(n_v, std::move(edges), std::move(attrs), std::move(segments));
  city.frames = std::move(frames);
  return city;
}

}  // namespace sparseflow::graphmodel
