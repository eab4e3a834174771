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
#include <vector>

#include "sparseflow/graphmodel/dataset.hpp"
#include "sparseflow/graphmodel/road_graph.hpp"

namespace sparseflow::graphmodel {

struct SynthSpec {
  Index nodes = 50;
  Index edges = 120;
  Index supersegments = 10;
  std::size_t frames = 200;
  double missing_fraction = 0.5;  // rho
  bool fixed_mask = true;         // same missing nodes in every frame
  bool per_cell_missing = false;  // independent cells instead of whole nodes
  double unlabeled_fraction = 0.05;
  std::array<double, 3> class_ratio{0.2, 0.3, 0.5};  // red, yellow, green
};

/// A generated city plus the latent quantities the labels were derived from.
struct SyntheticCity {
  RoadGraph graph;
  std::vector<CounterFrame> frames;
  /// Per frame, per edge: latent speed / speed_kph.
  std::vector<std::vector<double>> speed_ratio;
  /// Ratio thresholds separating red|yellow and yellow|green.
  std::array<double, 2> thresholds{};
};

/// Deterministic synthetic city.
///
/// Topology: a random spanning tree (random edge directions) plus extra
/// directed edges, half of them reverses of existing roads. Each edge has a
/// congestion sensitivity; a frame's congestion is sensitivity times a
/// daily/weekly demand profile times a per-frame fluctuation. Node counters
/// are Poisson draws of a base flow times the same demand over the hour
/// before the frame's slot. Labels: ratio thresholds at the class_ratio
/// quantiles of latent speed / speed_kph; super-segment speed is the
/// length-weighted mean latent speed of its edges.
SyntheticCity generate_synthetic_city(const SynthSpec& spec, std::uint64_t seed);

/// Demand profile in (0, 1] for a weekday/slot.
double synthetic_demand(int weekday, int slot);

}  // namespace sparseflow::graphmodel
