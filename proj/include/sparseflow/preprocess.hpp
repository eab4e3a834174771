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

#include <span>
#include <utility>

#include "sparseflow/graphmodel/dataset.hpp"
#include "sparseflow/norm_stats.hpp"

namespace sparseflow::preprocess {

using graphmodel::Mat;

/// Mean, population std, min and max over observed cells of the given frames.
/// Values are sorted before summation, so the result does not depend on
/// frame order. Throws DataError if nothing is observed or the std is zero.
NormStats fit_stats(std::span<const graphmodel::CounterFrame> frames, double clip_max = kDefaultClipMax);

/// z-score observed cells and clip them at clip_max; missing cells get the
/// z-scored dataset minimum. The result is NaN-free.
Mat normalize(const Mat& counts, const Mat& mask, const NormStats& stats);

/// Lowest/highest value normalize() can produce.
double normalized_floor(const NormStats& stats);
double normalized_ceiling(const NormStats& stats);

/// Wall-clock position within the week.
struct WeekTime {
  int weekday = 0;  // 0 = Monday ... 6 = Sunday
  int hour = 0;
  int minute = 0;
};

/// (weekday, 15-minute slot). Throws DataError on out-of-range input.
graphmodel::TimeIndex time_index(const WeekTime& t);

/// Range used by the unit-interval scaling in front of the reconstruction
/// model: the global normalised extremes, or the extremes of the input itself.
std::pair<double, double> unit_range(const Mat& normalized, const NormStats& stats, bool global_normalization);

/// (x - lo) / (hi - lo). Throws ContractError when hi <= lo.
Mat minmax_to_unit(const Mat& x, double lo, double hi);

/// Inverse of minmax_to_unit.
Mat restore(const Mat& unit, double lo, double hi);

}  // namespace sparseflow::preprocess
