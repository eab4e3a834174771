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

#include "sparseflow/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sparseflow/errors.hpp"

namespace sparseflow::preprocess {

NormStats fit_stats(std::span<const graphmodel::CounterFrame> frames, double clip_max) {
  std::vector<double> values;
  for (const auto& f : frames) {
    for (graphmodel::Index i = 0; i < f.counts.size(); ++i) {
      if (f.mask.data()[i] != 0.0) values.push_back(f.counts.data()[i]);
    }
  }
  if (values.empty()) throw DataError("fit_stats: no observed counter values");
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  const double n = static_cast<double>(values.size());
  NormStats s;
  s.mean = total / n;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  s.min = values.front();
  s.max = values.back();
  s.clip_max = clip_max;
  if (!(s.std > 0.0)) throw DataError("fit_stats: observed values have zero standard deviation");
  return s;
}

double normalized_floor(const NormStats& stats) {
  return std::min((stats.min - stats.mean) / stats.std, stats.clip_max);
}

double normalized_ceiling(const NormStats& stats) {
  return std::min((stats.max - stats.mean) / stats.std, stats.clip_max);
}

Mat normalize(const Mat& counts, const Mat& mask, const NormStats& stats) {
  if (counts.rows() != mask.rows() || counts.cols() != mask.cols()) {
    throw ShapeError("normalize: counts and mask shapes differ");
  }
  const double fill = normalized_floor(stats);
  Mat out(counts.rows(), counts.cols());
  for (graphmodel::Index i = 0; i < counts.size(); ++i) {
    if (mask.data()[i] != 0.0) {
      out.data()[i] = std::min((counts.data()[i] - stats.mean) / stats.std, stats.clip_max);
    } else {
      out.data()[i] = fill;
    }
  }
  return out;
}

graphmodel::TimeIndex time_index(const WeekTime& t) {
  if (t.weekday < 0 || t.weekday >= graphmodel::kDaysPerWeek) throw DataError("time_index: weekday out of range");
  if (t.hour < 0 || t.hour >= 24) throw DataError("time_index: hour out of range");
  if (t.minute < 0 || t.minute >= 60) throw DataError("time_index: minute out of range");
  return {t.weekday, (t.hour * 60 + t.minute) / 15};
}

std::pair<double, double> unit_range(const Mat& normalized, const NormStats& stats, bool global_normalization) {
  if (global_normalization) return {normalized_floor(stats), normalized_ceiling(stats)};
  return {normalized.minCoeff(), normalized.maxCoeff()};
}

Mat minmax_to_unit(const Mat& x, double lo, double hi) {
  if (!(hi > lo)) throw ContractError("minmax_to_unit: need hi > lo");
  return ((x.array() - lo) / (hi - lo)).matrix();
}

Mat restore(const Mat& unit, double lo, double hi) {
  if (!(hi > lo)) throw ContractError("restore: need hi > lo");
  return (unit.array() * (hi - lo) + lo).matrix();
}

}  // namespace sparseflow::preprocess
