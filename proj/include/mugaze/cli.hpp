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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mugaze/data.hpp"
#include "mugaze/dataset_io.hpp"
#include "mugaze/experiments.hpp"
#include "mugaze/model.hpp"

namespace mugaze::cli {

namespace detail {

struct SplitOpts {
  double val_frac = 0.1;
  double test_frac = 0.2;
  std::uint64_t split_seed = 12345;

  data::SplitDataset apply(const data::Dataset& ds) const {
    return data::make_split(ds, 1.0 - val_frac - test_frac, val_frac,
                            test_frac, split_seed);
  }
};

struct TrainOpts {
  double lambda = 1.0;
  std::size_t batch = 128;
  double lr = 5e-4;
  double decay_factor = 0.94;
  std::uint64_t decay_every = 2000;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  bool no_aux = false;
  bool no_3d = false;
  bool no_augment = false;
  double fov = 53.0;
  std::size_t val_every = 1;

  model::TrainConfig to_config(std::size_t channels) const {
    model::TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.batch = batch;
    cfg.base_lr = lr;
    cfg.decay_factor = decay_factor;
    cfg.decay_every = decay_every;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.channels = channels;
    cfg.aux_gaze = !no_aux;
    cfg.use_3d_encoding = !no_3d;
    cfg.augment = !no_augment;
    cfg.fov_deg = fov;
    cfg.val_every_epochs = val_every;
    return cfg;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"lambda", lambda},       {"batch", batch},
        {"lr", lr},               {"decay_factor", decay_factor},
        {"decay_every", decay_every}, {"epochs", epochs},
        {"seed", seed},           {"aux_gaze", !no_aux},
        {"use_3d_encoding", !no_3d}, {"augment", !no_augment},
        {"fov_deg", fov},         {"val_every", val_every}};
  }
};

inline void add_split_flags(CLI::App* cmd, SplitOpts& o) {
  cmd->add_option("--val-frac", o.val_frac, "Validation split fraction");
  cmd->add_option("--test-frac", o.test_frac, "Test split fraction");
  cmd->add_option("--split-seed", o.split_seed, "Seed for the split permutation");
}

inline void add_train_flags(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--lambda", o.lambda, "Auxiliary loss weight");
  cmd->add_option("--batch", o.batch, "Mini-batch size");
  cmd->add_option("--lr", o.lr, "Initial learning rate");
  cmd->add_option("--decay-factor", o.decay_factor, "LR decay factor");
  cmd->add_option("--decay-every", o.decay_every,
                  "Steps between LR decays");
  cmd->add_option("--epochs", o.epochs, "Training epochs");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_flag("--no-aux", o.no_aux, "Disable the auxiliary gaze task");
  cmd->add_flag("--no-3d", o.no_3d, "Zero out the 3D spatial encoding");
  cmd->add_flag("--no-augment", o.no_augment, "Disable augmentation");
  cmd->add_option("--fov", o.fov, "Horizontal field of view in degrees");
  cmd->add_option("--val-every", o.val_every,
                  "Validate every N epochs (0 = only at the end)");
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

inline void write_train_log(const std::filesystem::path& path,
                            const model::TrainResult& result) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  std::size_t vi = 0;
  for (const model::StepRecord& s : result.steps) {
    os << nlohmann::json{{"step", s.step},
                         {"lr", s.lr},
                         {"bce", s.bce},
                         {"gaze", s.gaze},
                         {"total", s.total}}
              .dump()
       << "\n";
    while (vi < result.val.size() && result.val[vi].step <= s.step) {
      os << nlohmann::json{{"step", result.val[vi].step},
                           {"val_ap", result.val[vi].ap}}
                .dump()
         << "\n";
      ++vi;
    }
  }
  for (; vi < result.val.size(); ++vi) {
    os << nlohmann::json{{"step", result.val[vi].step},
                         {"val_ap", result.val[vi].ap}}
              .dump()
       << "\n";
  }
}

inline std::vector<data::NegativeMode> parse_negative_modes(
    const std::string& csv) {
  std::vector<data::NegativeMode> modes;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) modes.push_back(data::negative_mode_from_string(item));
  }
  if (modes.empty()) throw ConfigError("no negative modes given");
  return modes;
}

/// Finite-difference check of the full training loss on one synthetic pair.
inline double full_loss_gradcheck(std::uint64_t seed, std::size_t channels,
                                  double step = 1e-5) {
  data::SyntheticSceneConfig scene;
  scene.seed = seed;
  scene.channels = channels;
  scene.pixel_noise = 0.0;
  Rng rng(seed);
  const data::PairSample sample = data::synth_generate_labeled(scene, 1, rng);
  const CameraIntrinsics cam =
      focal_from_fov(sample.dims, scene.fov_deg);
  const model::PreparedSample ps = model::prepare_sample(sample, cam);

  Rng init_rng(seed + 1);
  model::ModelParams params = model::ModelParams::init(channels, init_rng);
  const double lambda = 1.0;

  const auto loss_fn = [&]() {
    model::PairTrace tr;
    return model::pair_forward(params, *ps.patch1, *ps.patch2, ps.spatial,
                               ps.label, ps.v, lambda, true, tr)
        .total;
  };
  model::ModelParams grads = model::ModelParams::create(channels);
  model::PairTrace tr;
  model::pair_forward(params, *ps.patch1, *ps.patch2, ps.spatial, ps.label,
                      ps.v, lambda, true, tr);
  model::pair_backward(params, tr, grads);

  std::vector<const Tensor*> analytic;
  for (const Tensor* t : std::as_const(grads).tensors()) analytic.push_back(t);
  return nn::finite_diff_gradcheck(loss_fn, params.tensors(), analytic, step);
}

}  // namespace detail

/// Entry point for all subcommands. Takes the argument list without the
/// program name; returns the process exit status.
inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"mutual gaze detection pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Read defaults from a config file (flags still win)");

  // gen-synth ------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  std::size_t gen_n = 1000;
  double gen_pos_frac = 0.27;
  std::string gen_out;
  std::string gen_neg_modes = "averted_one,averted_both,parallel";
  data::SyntheticSceneConfig scene;
  gen->add_option("--n", gen_n, "Number of pairs");
  gen->add_option("--pos-frac", gen_pos_frac, "Positive fraction");
  gen->add_option("--seed", scene.seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--fov", scene.fov_deg, "Camera field of view (deg)");
  gen->add_option("--depth-min", scene.depth_min, "Minimum head depth (m)");
  gen->add_option("--depth-max", scene.depth_max, "Maximum head depth (m)");
  gen->add_option("--head-radius", scene.head_radius, "Head radius (m)");
  gen->add_option("--theta-mut", scene.mutual_angle_deg,
                  "Mutual-gaze angular threshold (deg)");
  gen->add_option("--noise", scene.pixel_noise, "Pixel noise amplitude");
  gen->add_option("--width", scene.image_width, "Image width (px)");
  gen->add_option("--height", scene.image_height, "Image height (px)");
  gen->add_option("--channels", scene.channels, "Patch channels (1 or 3)");
  gen->add_option("--neg-modes", gen_neg_modes,
                  "Comma-separated negative modes");

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  std::string train_data, train_out;
  detail::TrainOpts topts;
  detail::SplitOpts sopts;
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_out, "Run output directory")->required();
  detail::add_train_flags(train_cmd, topts);
  detail::add_split_flags(train_cmd, sopts);

  // eval -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_split = "test", eval_out;
  detail::SplitOpts eval_sopts;
  double eval_fov = 53.0;
  bool eval_no_3d = false;
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--split", eval_split, "Split to score: train|val|test|all");
  eval_cmd->add_option("--fov", eval_fov, "Field of view for spatial features");
  eval_cmd->add_flag("--no-3d", eval_no_3d, "Zero out the 3D spatial encoding");
  eval_cmd->add_option("--out", eval_out, "Optional report directory");
  detail::add_split_flags(eval_cmd, eval_sopts);

  // sweep-fov -----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep-fov",
                                       "Train/evaluate across FoV values");
  std::string sweep_data, sweep_out;
  std::vector<double> sweep_fovs{33.0, 53.0, 73.0};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};
  detail::TrainOpts sweep_topts;
  detail::SplitOpts sweep_sopts;
  sweep_cmd->add_option("--data", sweep_data, "Dataset directory")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  sweep_cmd->add_option("--fovs", sweep_fovs, "FoV values to sweep");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Seeds per condition");
  detail::add_train_flags(sweep_cmd, sweep_topts);
  detail::add_split_flags(sweep_cmd, sweep_sopts);

  // ablate -----------------------------------------------------------------------
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "Run the {aux on/off} x {3D encoding on/off} grid");
  std::string ablate_data, ablate_out;
  std::vector<std::uint64_t> ablate_seeds{1, 2, 3};
  detail::TrainOpts ablate_topts;
  detail::SplitOpts ablate_sopts;
  ablate_cmd->add_option("--data", ablate_data, "Dataset directory")->required();
  ablate_cmd->add_option("--out", ablate_out, "Output directory")->required();
  ablate_cmd->add_option("--seeds", ablate_seeds, "Seeds per condition");
  detail::add_train_flags(ablate_cmd, ablate_topts);
  detail::add_split_flags(ablate_cmd, ablate_sopts);

  // limited-data --------------------------------------------------------------------
  auto* limited_cmd = app.add_subcommand(
      "limited-data", "Compare full vs no-aux across training fractions");
  std::string limited_data, limited_out;
  std::vector<double> limited_fracs{0.125, 1.0};
  std::vector<std::uint64_t> limited_seeds{1, 2, 3};
  detail::TrainOpts limited_topts;
  detail::SplitOpts limited_sopts;
  limited_cmd->add_option("--data", limited_data, "Dataset directory")
      ->required();
  limited_cmd->add_option("--out", limited_out, "Output directory")->required();
  limited_cmd->add_option("--fractions", limited_fracs, "Training fractions");
  limited_cmd->add_option("--seeds", limited_seeds, "Seeds per condition");
  detail::add_train_flags(limited_cmd, limited_topts);
  detail::add_split_flags(limited_cmd, limited_sopts);

  // gradcheck -----------------------------------------------------------------------
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
  std::uint64_t grad_seed = 1;
  std::size_t grad_channels = 1;
  double grad_tol = 1e-3;
  grad_cmd->add_option("--seed", grad_seed, "Seed for the checked pair");
  grad_cmd->add_option("--channels", grad_channels, "Patch channels");
  grad_cmd->add_option("--tol", grad_tol, "Failure threshold");

  // infer ---------------------------------------------------------------------------
  auto* infer_cmd =
      app.add_subcommand("infer", "Score a single pair from a dataset record");
  std::string infer_data, infer_ckpt;
  std::size_t infer_index = 0;
  double infer_fov = 53.0;
  bool infer_no_3d = false;
  infer_cmd->add_option("--data", infer_data, "Dataset directory")->required();
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Checkpoint path")
      ->required();
  infer_cmd->add_option("--index", infer_index, "Record index");
  infer_cmd->add_option("--fov", infer_fov, "Field of view");
  infer_cmd->add_flag("--no-3d", infer_no_3d, "Zero out the 3D encoding");

  std::vector<std::string> argv_copy = args;
  try {
    std::vector<const char*> argv;
    argv.push_back("mugaze");
    for (const std::string& a : argv_copy) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      scene.negative_modes = detail::parse_negative_modes(gen_neg_modes);
      scene.validate();
      const data::Dataset ds =
          data::synth_make_dataset(scene, gen_n, gen_pos_frac);
      nlohmann::json gen_cfg{{"n", gen_n},
                             {"pos_frac", gen_pos_frac},
                             {"seed", scene.seed},
                             {"fov_deg", scene.fov_deg},
                             {"depth_min", scene.depth_min},
                             {"depth_max", scene.depth_max},
                             {"head_radius", scene.head_radius},
                             {"mutual_angle_deg", scene.mutual_angle_deg},
                             {"pixel_noise", scene.pixel_noise},
                             {"channels", scene.channels},
                             {"neg_modes", gen_neg_modes}};
      data::save_dataset(gen_out, ds, gen_cfg);
      std::cout << "wrote " << ds.samples.size() << " pairs ("
                << ds.positives() << " positive) to " << gen_out << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      const data::Dataset ds = data::load_dataset(train_data);
      const data::SplitDataset split = sopts.apply(ds);
      const model::TrainConfig cfg = topts.to_config(ds.channels);
      if (split.train.samples.empty()) {
        throw EmptyDataset("training split is empty");
      }
      std::filesystem::create_directories(train_out);
      nlohmann::json snapshot = topts.to_json();
      snapshot["data"] = train_data;
      snapshot["channels"] = ds.channels;
      snapshot["val_frac"] = sopts.val_frac;
      snapshot["test_frac"] = sopts.test_frac;
      snapshot["split_seed"] = sopts.split_seed;
      detail::write_json_file(std::filesystem::path(train_out) / "config.json",
                              snapshot);
      const model::TrainResult result =
          model::train(split.train.samples, split.val.samples, cfg);
      model::save_model(
          (std::filesystem::path(train_out) / "checkpoint.bin").string(),
          result.params, &result.opt);
      detail::write_train_log(
          std::filesystem::path(train_out) / "train_log.jsonl", result);
      const double test_ap =
          split.test.samples.empty()
              ? -1.0
              : model::evaluate_ap(result.params, split.test.samples,
                                   cfg.fov_deg, cfg.use_3d_encoding);
      std::cout << "trained " << result.steps.size() << " steps";
      if (test_ap >= 0.0) std::cout << ", test AP " << test_ap;
      std::cout << "\n";
      return 0;
    }

    if (eval_cmd->parsed()) {
      const data::Dataset ds = data::load_dataset(eval_data);
      const model::LoadedModel lm = model::load_model(eval_ckpt);
      std::vector<data::PairSample> subset;
      if (eval_split == "all") {
        subset = ds.samples;
      } else {
        const data::SplitDataset split = eval_sopts.apply(ds);
        if (eval_split == "train") subset = split.train.samples;
        else if (eval_split == "val") subset = split.val.samples;
        else if (eval_split == "test") subset = split.test.samples;
        else throw ConfigError("unknown split '" + eval_split + "'");
      }
      if (subset.empty()) throw EmptyDataset("selected split is empty");
      const double ap =
          model::evaluate_ap(lm.params, subset, eval_fov, !eval_no_3d);
      nlohmann::json rep{{"split", eval_split},
                         {"count", subset.size()},
                         {"fov_deg", eval_fov},
                         {"use_3d_encoding", !eval_no_3d},
                         {"ap", ap}};
      std::cout << rep.dump() << "\n";
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        detail::write_json_file(std::filesystem::path(eval_out) / "eval.json",
                                rep);
      }
      return 0;
    }

    const auto run_experiment =
        [&](const std::string& data_dir, const std::string& out_dir,
            const detail::TrainOpts& opts, const detail::SplitOpts& so,
            const nlohmann::json& extra,
            const std::function<std::vector<eval::ExperimentReport>(
                const data::SplitDataset&, const model::TrainConfig&)>& body) {
          const data::Dataset ds = data::load_dataset(data_dir);
          const data::SplitDataset split = so.apply(ds);
          const model::TrainConfig cfg = opts.to_config(ds.channels);
          std::filesystem::create_directories(out_dir);
          nlohmann::json snapshot = opts.to_json();
          snapshot["data"] = data_dir;
          snapshot["val_frac"] = so.val_frac;
          snapshot["test_frac"] = so.test_frac;
          snapshot["split_seed"] = so.split_seed;
          for (auto it = extra.begin(); it != extra.end(); ++it) {
            snapshot[it.key()] = it.value();
          }
          detail::write_json_file(
              std::filesystem::path(out_dir) / "config.json", snapshot);
          const std::vector<eval::ExperimentReport> reports = body(split, cfg);
          eval::write_reports_jsonl(
              (std::filesystem::path(out_dir) / "reports.jsonl").string(),
              reports);
          eval::write_reports_csv(
              (std::filesystem::path(out_dir) / "reports.csv").string(),
              reports);
          const std::string table = eval::reports_table(reports);
          std::ofstream ts(std::filesystem::path(out_dir) / "reports.txt");
          ts << table;
          std::cout << table;
        };

    if (sweep_cmd->parsed()) {
      run_experiment(sweep_data, sweep_out, sweep_topts, sweep_sopts,
                     {{"fovs", sweep_fovs}, {"seeds", sweep_seeds}},
                     [&](const data::SplitDataset& split,
                         const model::TrainConfig& cfg) {
                       return eval::fov_sweep(split, cfg, sweep_fovs,
                                              sweep_seeds);
                     });
      return 0;
    }

    if (ablate_cmd->parsed()) {
      run_experiment(ablate_data, ablate_out, ablate_topts, ablate_sopts,
                     {{"seeds", ablate_seeds}},
                     [&](const data::SplitDataset& split,
                         const model::TrainConfig& cfg) {
                       return eval::ablation_run(split, cfg, ablate_seeds);
                     });
      return 0;
    }

    if (limited_cmd->parsed()) {
      run_experiment(
          limited_data, limited_out, limited_topts, limited_sopts,
          {{"fractions", limited_fracs}, {"seeds", limited_seeds}},
          [&](const data::SplitDataset& split, const model::TrainConfig& cfg) {
            const auto ld =
                eval::limited_data_run(split, cfg, limited_fracs,
                                       limited_seeds);
            std::vector<eval::ExperimentReport> flat;
            for (const auto& r : ld) {
              flat.push_back(r.full);
              flat.push_back(r.no_aux);
              eval::ExperimentReport gap;
              std::ostringstream tag;
              tag << "frac_" << r.fraction << "_gap";
              gap.condition = tag.str();
              gap.seeds = r.full.seeds;
              gap.ap_per_seed = r.gap_per_seed;
              gap.median_ap = r.median_gap;
              flat.push_back(gap);
            }
            return flat;
          });
      return 0;
    }

    if (grad_cmd->parsed()) {
      const double err =
          detail::full_loss_gradcheck(grad_seed, grad_channels);
      std::cout << "max relative gradient error: " << err << "\n";
      return err < grad_tol ? 0 : 1;
    }

    if (infer_cmd->parsed()) {
      const data::Dataset ds = data::load_dataset(infer_data);
      if (infer_index >= ds.samples.size()) {
        throw ConfigError("record index out of range");
      }
      const model::LoadedModel lm = model::load_model(infer_ckpt);
      const data::PairSample& s = ds.samples[infer_index];
      const double score =
          model::score_sample(lm.params, s, infer_fov, !infer_no_3d);
      std::cout << nlohmann::json{{"index", infer_index},
                                  {"label", s.label},
                                  {"score", score}}
                       .dump()
                << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mugaze::cli
