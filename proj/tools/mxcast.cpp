// Copyright 2026 The mxcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line for the mxcast forecasting engine.
//
// Exit codes: 0 success, 2 usage error, 3 data parse/validation error,
// 4 training divergence, 5 gradient check failure, 6 no valid windows.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>

#include "mxcast/config.hpp"
#include "mxcast/data.hpp"
#include "mxcast/eval.hpp"
#include "mxcast/gradcheck.hpp"
#include "mxcast/model.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitGradcheck = 5;
constexpr int kExitEmpty = 6;

using mxcast::config::RunConfig;

struct Paths {
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string csv;
  std::string loss_log;
  std::string config;
  bool resume{false};
  bool corrupt{false};
  std::uint64_t sample_seed{0};
  double counterfactual_deg{std::numeric_limits<double>::quiet_NaN()};
};

void write_file(const std::string & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write: " + path);
  }
  out << text;
}

mxcast::model::Hyperparams hyperparams_from(const RunConfig & cfg)
{
  mxcast::model::Hyperparams hp;
  hp.hidden = cfg.hidden;
  hp.grid_cells = cfg.grid_cells;
  hp.cell_size = cfg.cell_size;
  hp.gamma_deg = cfg.gamma_deg;
  hp.vislet_radius = cfg.vislet_radius;
  hp.t_obs = cfg.t_obs;
  hp.t_pred = cfg.t_pred;
  hp.frame_period = cfg.frame_period;
  hp.seed = cfg.seed;
  return hp;
}

mxcast::data::SyntheticSceneSpec spec_from(const RunConfig & cfg)
{
  mxcast::data::SyntheticSceneSpec spec;
  spec.scenario = mxcast::data::scenario_from_string(cfg.scenario);
  spec.episodes = cfg.episodes;
  spec.members = cfg.members;
  spec.episode_frames = cfg.episode_frames;
  spec.head_lead = cfg.head_lead;
  spec.speed = cfg.speed;
  spec.pos_noise = cfg.pos_noise;
  spec.head_noise_deg = cfg.head_noise_deg;
  spec.frame_period = cfg.frame_period;
  spec.vislet_radius = cfg.vislet_radius;
  spec.seed = cfg.seed;
  spec.gaze_bias_speed = cfg.gaze_bias_speed;
  spec.jitter_speed = cfg.jitter_speed;
  return spec;
}

int stride_of(const RunConfig & cfg) { return cfg.window_stride > 0 ? cfg.window_stride : cfg.t_pred; }

int cmd_synth(const RunConfig & cfg, const Paths & paths)
{
  const auto scene = mxcast::data::generate_synthetic(spec_from(cfg));
  mxcast::data::write_trajectory_file(paths.out, scene);
  std::cout << "wrote " << paths.out << " (" << scene.tracks.size() << " tracks)\n";
  return 0;
}

int cmd_train(const RunConfig & cfg, const Paths & paths)
{
  const auto scene = mxcast::data::parse_trajectory_file(paths.data, cfg.vislet_radius);
  const auto variant = mxcast::model::variant_from_string(cfg.variant);
  if (variant != mxcast::model::Variant::kVanilla && !scene.has_heads) {
    std::cerr << "error: variant '" << cfg.variant << "' needs head annotations\n";
    return kExitData;
  }

  mxcast::model::MxLstmModel m;
  mxcast::nn::AdamOptimizer opt;
  mxcast::model::TrainConfig tc;
  int epochs_done = 0;

  if (paths.resume) {
    auto ck = mxcast::model::load_checkpoint(paths.checkpoint);
    if (!ck.has_optimizer) {
      std::cerr << "error: checkpoint has no optimizer state, cannot resume\n";
      return kExitData;
    }
    m = std::move(ck.model);
    opt = std::move(ck.optimizer);
    epochs_done = ck.epochs_done;
    tc.compute_scale = false;
    tc.opt = opt.config();
  } else {
    m = mxcast::model::MxLstmModel::create(variant, hyperparams_from(cfg));
    tc.opt.lr = cfg.lr;
    tc.opt.l2 = cfg.l2;
    tc.opt.lr_decay = cfg.lr_decay;
    opt = mxcast::nn::AdamOptimizer(tc.opt);
  }

  int skipped = 0;
  const auto windows =
    mxcast::data::extract_windows(scene, m.hp.t_pred, stride_of(cfg), &skipped);
  if (skipped > 0) {
    std::cerr << "warning: " << skipped << " pedestrian segments skipped (incomplete windows)\n";
  }
  if (windows.empty()) {
    std::cerr << "error: no usable training windows\n";
    return kExitEmpty;
  }

  tc.epochs = cfg.epochs;
  tc.start_epoch = epochs_done;
  tc.batch = cfg.batch;
  tc.clip_norm = cfg.clip_norm;
  tc.threads = cfg.threads;
  tc.scheduled_sampling = cfg.scheduled_sampling;
  tc.noise_aug_sigma_deg = cfg.noise_aug_sigma_deg;

  std::ofstream loss_log;
  if (!paths.loss_log.empty()) {
    const bool append = paths.resume;
    loss_log.open(paths.loss_log, append ? std::ios::app : std::ios::out);
    if (!append) {
      loss_log << "epoch,mean_nll\n";
    }
  }

  const auto result = mxcast::model::train(
    m, windows, tc, opt, [&](int epoch, double mean_nll) {
      mxcast::model::save_checkpoint(paths.checkpoint, m, &opt, epoch + 1);
      if (loss_log.is_open()) {
        loss_log << epoch << "," << mean_nll << "\n";
      }
    });

  if (result.diverged) {
    std::cerr << "error: training diverged (" << result.note
              << "); last good checkpoint kept at " << paths.checkpoint << "\n";
    return kExitDiverged;
  }
  std::cout << "trained " << result.epoch_mean_nll.size() << " epochs, final mean NLL "
            << (result.epoch_mean_nll.empty() ? 0.0 : result.epoch_mean_nll.back()) << "\n";
  std::cout << "checkpoint " << paths.checkpoint << "\n";
  return 0;
}

int cmd_forecast(const RunConfig & cfg, const Paths & paths)
{
  auto ck = mxcast::model::load_checkpoint(paths.checkpoint);
  auto & m = ck.model;
  auto scene = mxcast::data::parse_trajectory_file(paths.data, m.hp.vislet_radius);
  if (cfg.noise_sigma_deg > 0.0) {
    scene = mxcast::data::inject_head_noise(scene, cfg.noise_sigma_deg, cfg.seed);
  }

  int skipped = 0;
  const int frames = cfg.gt_neighbors ? m.hp.t_pred : m.hp.t_obs;
  const auto windows = mxcast::data::extract_windows(scene, frames, stride_of(cfg), &skipped);
  if (skipped > 0) {
    std::cerr << "warning: " << skipped << " pedestrian segments skipped (missing frames)\n";
  }
  if (windows.empty()) {
    std::cerr << "error: no usable observation windows\n";
    return kExitEmpty;
  }

  mxcast::model::ForecastOptions opt;
  opt.sampled = cfg.mode == "sample";
  opt.sample_seed = paths.sample_seed != 0 ? paths.sample_seed : cfg.seed;
  opt.gt_neighbors = cfg.gt_neighbors;

  std::string out_text;
  for (const auto & w : windows) {
    mxcast::model::ForecastResult fr;
    if (std::isfinite(paths.counterfactual_deg)) {
      fr = mxcast::model::counterfactual_forecast(
        m, w, mxcast::deg_to_rad(paths.counterfactual_deg), opt);
    } else {
      fr = mxcast::model::forecast(m, w, opt);
    }
    const std::string tsv = mxcast::eval::forecast_tsv(fr);
    if (out_text.empty()) {
      out_text = tsv;
    } else {
      out_text += tsv.substr(tsv.find('\n') + 1);  // drop the repeated header
    }
  }
  write_file(paths.out, out_text);
  std::cout << "wrote " << paths.out << " (" << windows.size() << " windows)\n";
  return 0;
}

int cmd_evaluate(const RunConfig & cfg, const Paths & paths)
{
  auto ck = mxcast::model::load_checkpoint(paths.checkpoint);
  auto & m = ck.model;
  const auto scene = mxcast::data::parse_trajectory_file(paths.data, m.hp.vislet_radius);

  int skipped = 0;
  const auto gt_windows =
    mxcast::data::extract_windows(scene, m.hp.t_pred, stride_of(cfg), &skipped);
  if (gt_windows.empty()) {
    std::cerr << "error: no complete evaluation windows (need " << m.hp.t_pred
              << " consecutive frames)\n";
    return kExitEmpty;
  }
  std::vector<mxcast::data::SceneWindow> in_windows = gt_windows;
  if (cfg.noise_sigma_deg > 0.0) {
    const auto noised =
      mxcast::data::inject_head_noise(scene, cfg.noise_sigma_deg, cfg.seed);
    in_windows = mxcast::data::extract_windows(noised, m.hp.t_pred, stride_of(cfg));
  }

  mxcast::model::ForecastOptions opt;
  opt.sampled = cfg.mode == "sample";
  opt.sample_seed = paths.sample_seed != 0 ? paths.sample_seed : cfg.seed;
  opt.gt_neighbors = cfg.gt_neighbors;

  auto report = mxcast::eval::evaluate_windows(m, in_windows, gt_windows, opt);
  report.skipped = skipped;

  const std::string text = mxcast::eval::metric_report_text(report);
  if (!paths.out.empty()) {
    write_file(paths.out, text);
  }
  if (!paths.csv.empty()) {
    write_file(paths.csv, mxcast::eval::metric_report_csv(report));
  }
  std::cout << text;
  return 0;
}

int cmd_analyze(const RunConfig & cfg, const Paths & paths)
{
  const auto scene = mxcast::data::parse_trajectory_file(paths.data, cfg.vislet_radius);
  const auto report =
    mxcast::eval::motivation_analysis(scene, cfg.min_speed, cfg.bin_half_width, cfg.bins);
  const std::string text = mxcast::eval::correlation_report_text(report);
  if (!paths.out.empty()) {
    write_file(paths.out, text);
  }
  if (!paths.csv.empty()) {
    write_file(paths.csv, mxcast::eval::correlation_report_csv(report));
  }
  std::cout << text;
  return 0;
}

int cmd_gradcheck(const RunConfig & cfg, const Paths & paths)
{
  const auto report = mxcast::gradcheck::run(cfg.seed, paths.corrupt);
  std::cout << mxcast::gradcheck::report_text(report);
  return report.pass ? 0 : kExitGradcheck;
}

// Precedence: command-line flags > config file > MXCAST_SEED > defaults.
RunConfig initial_config(int argc, char ** argv, bool & seed_from_file)
{
  RunConfig cfg;
  std::set<std::string> seen;
  for (int k = 1; k + 1 < argc; ++k) {
    if (std::string(argv[k]) == "--config") {
      cfg = mxcast::config::load_config(argv[k + 1], &seen);
      break;
    }
  }
  seed_from_file = seen.count("seed") > 0;
  return cfg;
}

void add_common(CLI::App * app, RunConfig & cfg, Paths & paths)
{
  app->add_option("--config", paths.config, "config file (key=value lines)");
  app->add_option("--seed", cfg.seed, "run seed");
  app->add_option("--threads", cfg.threads, "worker threads (1 = bitwise reproducible)");
  app->add_option("--frame-period", cfg.frame_period, "seconds per frame");
  app->add_option("--vislet-radius", cfg.vislet_radius, "vislet anchor radius, meters");
}

void add_model_opts(CLI::App * app, RunConfig & cfg)
{
  app->add_option("--variant", cfg.variant, "full|bd|no_frustum|individual|vanilla");
  app->add_option("--hidden", cfg.hidden, "hidden size D");
  app->add_option("--grid-cells", cfg.grid_cells, "pooling grid cells per side");
  app->add_option("--cell-size", cfg.cell_size, "pooling cell size, meters");
  app->add_option("--gamma-deg", cfg.gamma_deg, "view frustum aperture, degrees");
  app->add_option("--t-obs", cfg.t_obs, "observed frames");
  app->add_option("--t-pred", cfg.t_pred, "total frames (observed + predicted)");
  app->add_option("--stride", cfg.window_stride, "window stride (0 = t_pred)");
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"mxcast: joint trajectory and head-pose forecasting"};
  app.require_subcommand(1);

  bool seed_from_file = false;
  RunConfig cfg;
  try {
    cfg = initial_config(argc, argv, seed_from_file);
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  Paths paths;

  auto * synth = app.add_subcommand("synth", "generate a synthetic scene file");
  add_common(synth, cfg, paths);
  synth->add_option("--scenario", cfg.scenario,
                    "linear|turn_with_head_lead|group_conversation|slow_wander");
  synth->add_option("--episodes", cfg.episodes, "independent episodes");
  synth->add_option("--members", cfg.members, "pedestrians per episode");
  synth->add_option("--frames", cfg.episode_frames, "frames per episode");
  synth->add_option("--lead", cfg.head_lead, "frames the head precedes the turn");
  synth->add_option("--speed", cfg.speed, "nominal speed m/s");
  synth->add_option("--pos-noise", cfg.pos_noise, "positional noise std, meters/step");
  synth->add_option("--head-noise", cfg.head_noise_deg, "head noise std, degrees");
  synth->add_option("--gaze-bias-speed", cfg.gaze_bias_speed, "group sway speed m/s");
  synth->add_option("--jitter-speed", cfg.jitter_speed, "group jitter speed m/s");
  synth->add_option("--out", paths.out, "output trajectory file")->required();

  auto * train = app.add_subcommand("train", "train a model");
  add_common(train, cfg, paths);
  add_model_opts(train, cfg);
  train->add_option("--data", paths.data, "training trajectory file")->required();
  train->add_option("--checkpoint", paths.checkpoint, "checkpoint output path")->required();
  train->add_option("--loss-log", paths.loss_log, "loss curve CSV path");
  train->add_option("--epochs", cfg.epochs, "training epochs");
  train->add_option("--batch", cfg.batch, "windows per optimizer step");
  train->add_option("--lr", cfg.lr, "learning rate");
  train->add_option("--l2", cfg.l2, "decoupled l2 coefficient");
  train->add_option("--lr-decay", cfg.lr_decay, "per-step learning rate decay");
  train->add_option("--clip", cfg.clip_norm, "global gradient norm clip");
  train->add_option("--scheduled-sampling", cfg.scheduled_sampling,
                    "probability of feeding back the predicted mean");
  train->add_option("--noise-aug", cfg.noise_aug_sigma_deg,
                    "head-noise augmentation sigma, degrees");
  train->add_flag("--resume", paths.resume, "resume from --checkpoint");

  auto * fc = app.add_subcommand("forecast", "roll out predictions to a TSV");
  add_common(fc, cfg, paths);
  fc->add_option("--checkpoint", paths.checkpoint, "model checkpoint")->required();
  fc->add_option("--data", paths.data, "trajectory file with observations")->required();
  fc->add_option("--out", paths.out, "output TSV path")->required();
  fc->add_option("--mode", cfg.mode, "mean|sample");
  fc->add_option("--sample-seed", paths.sample_seed, "sampling stream seed");
  fc->add_option("--stride", cfg.window_stride, "window stride (0 = t_pred)");
  fc->add_option("--noise-sigma", cfg.noise_sigma_deg, "corrupt input head poses, degrees");
  fc->add_option("--counterfactual-deg", paths.counterfactual_deg,
                 "override all observation vislets with this angle (degrees)");
  fc->add_flag("--gt-neighbors", cfg.gt_neighbors, "pool ground-truth neighbor futures");

  auto * ev = app.add_subcommand("evaluate", "forecast and score against ground truth");
  add_common(ev, cfg, paths);
  ev->add_option("--checkpoint", paths.checkpoint, "model checkpoint")->required();
  ev->add_option("--data", paths.data, "trajectory file with ground truth")->required();
  ev->add_option("--out", paths.out, "report text path");
  ev->add_option("--csv", paths.csv, "per-pedestrian CSV path");
  ev->add_option("--mode", cfg.mode, "mean|sample");
  ev->add_option("--sample-seed", paths.sample_seed, "sampling stream seed");
  ev->add_option("--stride", cfg.window_stride, "window stride (0 = t_pred)");
  ev->add_option("--noise-sigma", cfg.noise_sigma_deg, "corrupt input head poses, degrees");
  ev->add_flag("--gt-neighbors", cfg.gt_neighbors, "pool ground-truth neighbor futures");

  auto * an = app.add_subcommand("analyze", "head pose vs motion statistics");
  add_common(an, cfg, paths);
  an->add_option("--data", paths.data, "trajectory file")->required();
  an->add_option("--out", paths.out, "report text path");
  an->add_option("--csv", paths.csv, "per-track CSV path");
  an->add_option("--min-speed", cfg.min_speed, "velocity threshold m/s");
  an->add_option("--bin-half-width", cfg.bin_half_width,
                 "velocity bin half width as a fraction of the range");
  an->add_option("--bins", cfg.bins, "velocity bin count");

  auto * gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(gc, cfg, paths);
  gc->add_flag("--self-test-corrupt", paths.corrupt)->group("");  // hidden negative control

  // Seed fallback: environment variable, unless the flag or file set it.
  const bool seed_flag_given = [&] {
    for (int k = 1; k < argc; ++k) {
      if (std::string(argv[k]) == "--seed") {
        return true;
      }
    }
    return false;
  }();
  if (!seed_flag_given && !seed_from_file) {
    if (const char * env = std::getenv("MXCAST_SEED")) {
      cfg.seed = std::strtoull(env, nullptr, 10);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg, paths);
    if (train->parsed()) return cmd_train(cfg, paths);
    if (fc->parsed()) return cmd_forecast(cfg, paths);
    if (ev->parsed()) return cmd_evaluate(cfg, paths);
    if (an->parsed()) return cmd_analyze(cfg, paths);
    if (gc->parsed()) return cmd_gradcheck(cfg, paths);
  } catch (const mxcast::data::parse_error & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const mxcast::nn::training_divergence_error & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
