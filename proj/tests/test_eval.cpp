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
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mugaze/eval.hpp"
#include "mugaze/rng.hpp"

using namespace mugaze;
using namespace mugaze::eval;

namespace {

// Independent oracle: evaluate precision/recall at every distinct score
// threshold (predict positive iff score >= t) and integrate the step curve.
// Valid whenever the scores are distinct.
double brute_force_ap(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::size_t total_pos = 0;
  for (int l : labels) total_pos += static_cast<std::size_t>(l != 0);

  double ap = 0.0;
  double prev_recall = 0.0;
  for (const double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i]) ++tp; else ++fp;
      }
    }
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall =
        static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Distinct scores in (0, 1).
std::vector<double> distinct_scores(std::size_t n, Rng& rng) {
  std::set<double> seen;
  std::vector<double> out;
  while (out.size() < n) {
    const double s = rng.uniform(1e-6, 1.0 - 1e-6);
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(AveragePrecision, PerfectRanking) {
  const PRCurve c = average_precision({0.9, 0.1}, {1, 0});
  EXPECT_DOUBLE_EQ(c.ap, 1.0);
}

TEST(AveragePrecision, WorstRankingOfOnePositive) {
  const PRCurve c = average_precision({0.9, 0.1}, {0, 1});
  EXPECT_DOUBLE_EQ(c.ap, 0.5);
  EXPECT_DOUBLE_EQ(brute_force_ap({0.9, 0.1}, {0, 1}), 0.5);
}

TEST(AveragePrecision, WorkedThreeSampleExample) {
  const std::vector<double> scores{0.9, 0.8, 0.3};
  const std::vector<int> labels{1, 0, 1};
  const PRCurve c = average_precision(scores, labels);
  EXPECT_DOUBLE_EQ(c.ap, (1.0 + 2.0 / 3.0) / 2.0);  // 5/6
  EXPECT_DOUBLE_EQ(brute_force_ap(scores, labels), c.ap);
}

TEST(AveragePrecision, MatchesBruteForceOracleOnRandomInstances) {
  Rng rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(199);
    const std::vector<double> scores = distinct_scores(n, rng);
    std::vector<int> labels(n);
    bool any_pos = false;
    for (auto& l : labels) {
      l = rng.bernoulli(0.3) ? 1 : 0;
      any_pos |= (l == 1);
    }
    if (!any_pos) labels[rng.uniform_index(n)] = 1;
    const PRCurve c = average_precision(scores, labels);
    EXPECT_DOUBLE_EQ(c.ap, brute_force_ap(scores, labels)) << "trial " << trial;
  }
}

TEST(AveragePrecision, RecallsNonDecreasingAndApInRange) {
  Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(100);
    const std::vector<double> scores = distinct_scores(n, rng);
    std::vector<int> labels(n, 0);
    labels[rng.uniform_index(n)] = 1;
    labels[rng.uniform_index(n)] = 1;
    const PRCurve c = average_precision(scores, labels);
    EXPECT_GE(c.ap, 0.0);
    EXPECT_LE(c.ap, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GE(c.points[i].recall, c.points[i - 1].recall);
    }
  }
}

TEST(AveragePrecision, InvariantUnderStrictlyIncreasingTransform) {
  Rng rng(63);
  const std::vector<double> scores = distinct_scores(80, rng);
  std::vector<int> labels(80);
  for (auto& l : labels) l = rng.bernoulli(0.4) ? 1 : 0;
  labels[0] = 1;
  const double base = average_precision(scores, labels).ap;

  std::vector<double> squashed(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    squashed[i] = std::tanh(3.0 * scores[i]) + 2.0;
  }
  EXPECT_DOUBLE_EQ(average_precision(squashed, labels).ap, base);

  std::vector<double> scaled(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scaled[i] = 0.001 * scores[i] - 7.0;
  }
  EXPECT_DOUBLE_EQ(average_precision(scaled, labels).ap, base);
}

TEST(AveragePrecision, RandomScoresApproachPositiveFraction) {
  Rng rng(64);
  const double pos_frac = 0.3;
  const std::size_t n = 200;
  double mean_ap = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform();
      labels[i] = rng.bernoulli(pos_frac) ? 1 : 0;
      any |= (labels[i] == 1);
    }
    if (!any) labels[0] = 1;
    mean_ap += average_precision(scores, labels).ap;
  }
  mean_ap /= trials;
  EXPECT_NEAR(mean_ap, pos_frac, 0.05);
}

TEST(AveragePrecision, TieBreakByOriginalIndexDocumentedBehavior) {
  // Equal scores: the earlier index ranks first.
  const PRCurve c = average_precision({0.5, 0.5}, {1, 0});
  EXPECT_DOUBLE_EQ(c.ap, 1.0);
  const PRCurve d = average_precision({0.5, 0.5}, {0, 1});
  EXPECT_DOUBLE_EQ(d.ap, 0.5);
}

TEST(AveragePrecision, ErrorsOnBadInput) {
  EXPECT_THROW(average_precision({0.5}, {0}), NoPositives);
  EXPECT_THROW(average_precision({0.5, 0.2}, {1}), ShapeMismatch);
}

TEST(Median, OrderStatistic) {
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_DOUBLE_EQ(median({5.0}), 5.0);
  EXPECT_THROW(median({}), EmptyDataset);
}

TEST(ExperimentReport, MedianComputedOverSeeds) {
  const ExperimentReport r =
      make_report("cond", {1, 2, 3}, {0.8, 0.6, 0.7});
  EXPECT_DOUBLE_EQ(r.median_ap, 0.7);
  EXPECT_EQ(r.seeds.size(), r.ap_per_seed.size());
}
