/**
 * Copyright 2026 The Mugaze Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mugaze/errors.hpp"

namespace mugaze::eval {

struct PRPoint {
  double recall;
  double precision;
};

/// Precision-recall curve with its area (average precision). Points are
/// ordered by rank, so recalls are non-decreasing.
struct PRCurve {
  std::vector<PRPoint> points;
  double ap = 0.0;
};

/// Step-interpolated average precision: samples are ranked by descending
/// score (exact ties broken by the original index, ascending), and AP is the
/// mean of precision-at-rank over the positive samples. This equals the area
/// under the stepwise PR curve evaluated at every distinct threshold when
/// scores are distinct.
inline PRCurve average_precision(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ShapeMismatch("scores/labels length mismatch");
  }
  std::size_t total_pos = 0;
  for (int l : labels) total_pos += static_cast<std::size_t>(l != 0);
  if (total_pos == 0) {
    throw NoPositives("average precision needs at least one positive label");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });

  PRCurve curve;
  curve.points.reserve(scores.size());
  std::size_t tp = 0;
  double ap_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const bool positive = labels[order[rank]] != 0;
    if (positive) ++tp;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(rank + 1);
    const double recall =
        static_cast<double>(tp) / static_cast<double>(total_pos);
    curve.points.push_back(PRPoint{recall, precision});
    if (positive) ap_sum += precision;
  }
  curve.ap = ap_sum / static_cast<double>(total_pos);
  return curve;
}

/// Median by the standard order statistic (mean of the two central values
/// for even counts).
inline double median(std::vector<double> values) {
  if (values.empty()) throw EmptyDataset("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

/// Outcome of one experimental condition across seeds.
struct ExperimentReport {
  std::string condition;
  std::vector<std::uint64_t> seeds;
  std::vector<double> ap_per_seed;
  double median_ap = 0.0;
};

inline ExperimentReport make_report(std::string condition,
                                    std::vector<std::uint64_t> seeds,
                                    std::vector<double> ap_per_seed) {
  ExperimentReport r;
  r.condition = std::move(condition);
  r.seeds = std::move(seeds);
  r.ap_per_seed = std::move(ap_per_seed);
  r.median_ap = median(r.ap_per_seed);
  return r;
}

}  // namespace mugaze::eval
