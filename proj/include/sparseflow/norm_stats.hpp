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

namespace sparseflow {

/// Upper clip applied to z-scored counters.
inline constexpr double kDefaultClipMax = 23.91;

/// Per-city counter statistics over observed training cells.
struct NormStats {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation, > 0
  double min = 0.0;
  double max = 0.0;
  double clip_max = kDefaultClipMax;

  bool operator==(const NormStats&) const = default;
};

}  // namespace sparseflow
