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
#include <map>
#include <string>
#include <vector>

#include "sparseflow/graphmodel/road_graph.hpp"
#include "sparseflow/norm_stats.hpp"

namespace sparseflow::train {

using graphmodel::Mat;

struct NamedTensor {
  std::string name;
  Mat value;

  bool operator==(const NamedTensor&) const = default;
};

/// Everything needed to rebuild a model: configuration and data-derived
/// state as text metadata, normalisation stats, and every parameter tensor in
/// registration order.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  NormStats stats;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers and floats little-endian:
///
///   "SPFLCKPT" u32 version
///   u32 n_meta, then n_meta x (u32 len, key bytes, u32 len, value bytes)
///   5 x f64 stats (mean, std, min, max, clip_max)
///   u32 n_tensors, then n_tensors x (u32 len, name bytes, u32 ndims,
///                                    ndims x u64 dim, prod(dims) x f64 payload)
///
/// Payload order is row-major.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source = "<memory>");

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Elementwise mean of the last k checkpoints. Metadata and stats come from
/// the newest one; all checkpoints must hold the same tensor names and
/// shapes. Throws ContractError when fewer than k are given or k == 0.
Checkpoint average_last_k(const std::vector<Checkpoint>& checkpoints, std::size_t k);

}  // namespace sparseflow::train
