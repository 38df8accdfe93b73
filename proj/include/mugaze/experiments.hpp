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

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mugaze/data.hpp"
#include "mugaze/errors.hpp"
#include "mugaze/eval.hpp"
#include "mugaze/model.hpp"

namespace mugaze::eval {

/// Trains one configuration once per seed and reports the per-seed test APs
/// with their median.
inline ExperimentReport run_condition(
    const std::string& condition, const data::SplitDataset& ds,
    const model::TrainConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::vector<double> aps;
  aps.reserve(seeds.size());
  for (const std::uint64_t seed : seeds) {
    model::TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    const model::TrainResult result =
        model::train(ds.train.samples, ds.val.samples, run_cfg);
    aps.push_back(model::evaluate_ap(result.params, ds.test.samples,
                                     run_cfg.fov_deg,
                                     run_cfg.use_3d_encoding));
  }
  return make_report(condition, seeds, std::move(aps));
}

/// Retrains with the 3D features and pseudo labels recomputed at each field
/// of view, and reports the test AP per value.
inline std::vector<ExperimentReport> fov_sweep(
    const data::SplitDataset& ds, const model::TrainConfig& base,
    const std::vector<double>& fov_values,
    const std::vector<std::uint64_t>& seeds) {
  if (fov_values.empty()) throw ConfigError("fov sweep needs at least one value");
  std::vector<ExperimentReport> reports;
  reports.reserve(fov_values.size());
  for (const double fov : fov_values) {
    model::TrainConfig cfg = base;
    cfg.fov_deg = fov;
    std::ostringstream name;
    name << "fov_" << fov;
    reports.push_back(run_condition(name.str(), ds, cfg, seeds));
  }
  return reports;
}

inline const std::vector<std::string>& ablation_condition_names() {
  static const std::vector<std::string> names = {"full", "no_aux", "no_3d",
                                                 "no_aux_no_3d"};
  return names;
}

/// The 2x2 grid {auxiliary gaze task on/off} x {3D spatial encoding on/off}
/// with shared seeds.
inline std::vector<ExperimentReport> ablation_run(
    const data::SplitDataset& ds, const model::TrainConfig& base,
    const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 3) throw ConfigError("ablation requires at least 3 seeds");
  std::vector<ExperimentReport> reports;
  for (const std::string& name : ablation_condition_names()) {
    model::TrainConfig cfg = base;
    cfg.aux_gaze = (name == "full" || name == "no_3d");
    cfg.use_3d_encoding = (name == "full" || name == "no_aux");
    reports.push_back(run_condition(name, ds, cfg, seeds));
  }
  return reports;
}

struct LimitedDataReport {
  double fraction = 0.0;
  ExperimentReport full;
  ExperimentReport no_aux;
  std::vector<double> gap_per_seed;
  double median_gap = 0.0;
};

/// Trains the full and no-auxiliary models on deterministic training
/// subsets and reports the AP gap per fraction.
inline std::vector<LimitedDataReport> limited_data_run(
    const data::SplitDataset& ds, const model::TrainConfig& base,
    const std::vector<double>& fractions,
    const std::vector<std::uint64_t>& seeds) {
  if (fractions.empty()) throw ConfigError("no training fractions given");
  std::vector<LimitedDataReport> reports;
  for (const double fraction : fractions) {
    if (fraction <= 0.0 || fraction > 1.0) {
      throw ConfigError("training fractions must lie in (0, 1]");
    }
    LimitedDataReport rep;
    rep.fraction = fraction;
    std::vector<double> ap_full, ap_noaux;
    for (const std::uint64_t seed : seeds) {
      data::SplitDataset sub;
      sub.train = data::subsample_dataset(ds.train, fraction, seed);
      sub.val = ds.val;
      sub.test = ds.test;

      model::TrainConfig cfg_full = base;
      cfg_full.aux_gaze = true;
      model::TrainConfig cfg_noaux = base;
      cfg_noaux.aux_gaze = false;

      ap_full.push_back(
          run_condition("full", sub, cfg_full, {seed}).ap_per_seed[0]);
      ap_noaux.push_back(
          run_condition("no_aux", sub, cfg_noaux, {seed}).ap_per_seed[0]);
      rep.gap_per_seed.push_back(ap_full.back() - ap_noaux.back());
    }
    std::ostringstream tag;
    tag << "frac_" << fraction;
    rep.full = make_report(tag.str() + "_full",
                           std::vector<std::uint64_t>(seeds), ap_full);
    rep.no_aux = make_report(tag.str() + "_no_aux",
                             std::vector<std::uint64_t>(seeds), ap_noaux);
    rep.median_gap = median(rep.gap_per_seed);
    reports.push_back(std::move(rep));
  }
  return reports;
}

// --- report serialization ------------------------------------------------------

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  return nlohmann::json{{"condition", r.condition},
                        {"seeds", r.seeds},
                        {"ap_per_seed", r.ap_per_seed},
                        {"median_ap", r.median_ap}};
}

inline void write_reports_jsonl(const std::string& path,
                                const std::vector<ExperimentReport>& reports) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write report file " + path);
  for (const ExperimentReport& r : reports) {
    os << report_to_json(r).dump() << "\n";
  }
}

inline std::string reports_table(const std::vector<ExperimentReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "condition" << std::setw(12)
     << "median_ap"
     << "per-seed AP\n";
  for (const ExperimentReport& r : reports) {
    os << std::left << std::setw(20) << r.condition << std::setw(12)
       << std::fixed << std::setprecision(4) << r.median_ap;
    for (double ap : r.ap_per_seed) {
      os << std::fixed << std::setprecision(4) << ap << " ";
    }
    os << "\n";
  }
  return os.str();
}

inline void write_reports_csv(const std::string& path,
                              const std::vector<ExperimentReport>& reports) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write csv file " + path);
  os << "condition,median_ap";
  std::size_t max_seeds = 0;
  for (const auto& r : reports) max_seeds = std::max(max_seeds, r.seeds.size());
  for (std::size_t i = 0; i < max_seeds; ++i) os << ",ap_seed" << i;
  os << "\n";
  for (const ExperimentReport& r : reports) {
    os << r.condition << "," << r.median_ap;
    for (double ap : r.ap_per_seed) os << "," << ap;
    os << "\n";
  }
}

}  // namespace mugaze::eval
