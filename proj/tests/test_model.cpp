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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mxcast/data.hpp"
#include "mxcast/eval.hpp"
#include "mxcast/gradcheck.hpp"
#include "mxcast/model.hpp"

using namespace mxcast;
using model::MxLstmModel;
using model::Variant;

namespace {

model::Hyperparams small_hp(std::uint64_t seed = 1234)
{
  model::Hyperparams hp;
  hp.hidden = 8;
  hp.grid_cells = 8;
  hp.cell_size = 0.5;
  hp.seed = seed;
  return hp;
}

data::SceneWindow random_window(Rng & rng, int peds, int frames, double radius)
{
  data::SceneWindow w;
  for (int i = 0; i < peds; ++i) {
    data::PedWindow pw;
    pw.ped_id = i + 1;
    Position p{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    for (int t = 0; t < frames; ++t) {
      p.x += rng.uniform(-0.3, 0.3);
      p.y += rng.uniform(-0.3, 0.3);
      pw.pos.push_back(p);
      pw.anchor.push_back(
        vislet_from_angle(p, HeadAngle(rng.uniform(-M_PI, M_PI)), radius).anchor);
    }
    pw.anchor_in = pw.anchor;
    w.peds.push_back(std::move(pw));
  }
  return w;
}

void zero_layer(nn::EmbeddingLayer & layer)
{
  layer.weight.setZero();
  layer.bias.setZero();
}

}  // namespace

TEST_CASE("zero-weight model predicts the bias output everywhere")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp());
  for (auto & b : model::param_blocks(m)) {
    if (b.mat != nullptr) {
      b.mat->setZero();
    } else {
      b.vec->setZero();
    }
  }
  m.head.bias[0] = 0.25;  // constant mu_x
  Rng rng(3);
  const auto w = random_window(rng, 2, m.hp.t_pred, m.hp.vislet_radius);
  const auto fr = model::forecast(m, w);
  for (const auto & ped : fr.peds) {
    REQUIRE(static_cast<int>(ped.steps.size()) == m.hp.pred_steps());
    for (const auto & sp : ped.steps) {
      CHECK(sp.mu_world[0] == doctest::Approx(0.25 * m.input_scale));
      CHECK(sp.mu_world[1] == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("mean-mode forecast is deterministic")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp(777));
  Rng rng(5);
  const auto w = random_window(rng, 3, m.hp.t_pred, m.hp.vislet_radius);
  const auto a = model::forecast(m, w);
  const auto b = model::forecast(m, w);
  REQUIRE(a.peds.size() == b.peds.size());
  for (std::size_t i = 0; i < a.peds.size(); ++i) {
    for (std::size_t k = 0; k < a.peds[i].steps.size(); ++k) {
      CHECK(a.peds[i].steps[k].position.x == b.peds[i].steps[k].position.x);
      CHECK(a.peds[i].steps[k].position.y == b.peds[i].steps[k].position.y);
    }
  }
}

TEST_CASE("sampled one-step mean agrees with mu within Monte Carlo error")
{
  auto hp = small_hp(31);
  hp.t_obs = 8;
  hp.t_pred = 9;  // a single predicted step
  auto m = MxLstmModel::create(Variant::kFull, hp);
  Rng rng(9);
  const auto w = random_window(rng, 1, hp.t_pred, hp.vislet_radius);

  const auto mean_run = model::forecast(m, w);
  const Eigen::Vector4d mu = mean_run.peds[0].steps[0].mu_world;
  // sigma of the first coordinate in world units
  gaussian::LogCholParams p;
  p.theta = mean_run.peds[0].steps[0].theta_world;
  const auto g4 = gaussian::reconstruct(p);
  const double sd_x = std::sqrt(g4.sigma(0, 0));

  const int n = 1000;
  double sum_dx = 0.0;
  for (int k = 0; k < n; ++k) {
    model::ForecastOptions opt;
    opt.sampled = true;
    opt.sample_seed = 1000 + k;
    const auto fr = model::forecast(m, w, opt);
    sum_dx += fr.peds[0].steps[0].position.x - w.peds[0].pos[7].x;
  }
  const double mean_dx = sum_dx / n;
  const double se = sd_x / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean_dx - mu[0]) < 3.0 * se + 1e-12);
}

TEST_CASE("variant reduction: zeroed vislet and pooling streams reproduce vanilla")
{
  auto hp = small_hp(99);
  auto full = MxLstmModel::create(Variant::kFull, hp);
  auto vanilla = MxLstmModel::create(Variant::kVanilla, hp);
  // Share the common layers, silence the extra streams.
  vanilla.embed_x = full.embed_x;
  vanilla.lstm = full.lstm;
  vanilla.head = full.head;
  vanilla.input_scale = full.input_scale;
  zero_layer(full.embed_a);
  zero_layer(full.embed_h);

  Rng rng(11);
  const auto w = random_window(rng, 3, hp.t_pred, hp.vislet_radius);
  const auto fa = model::forecast(full, w);
  const auto fb = model::forecast(vanilla, w);
  for (std::size_t i = 0; i < fa.peds.size(); ++i) {
    for (std::size_t k = 0; k < fa.peds[i].steps.size(); ++k) {
      // Identical hidden trajectories imply identical raw head outputs.
      CHECK(fa.peds[i].steps[k].mu_world[0] ==
            doctest::Approx(fb.peds[i].steps[k].mu_world[0]).epsilon(1e-12));
      CHECK(fa.peds[i].steps[k].mu_world[1] ==
            doctest::Approx(fb.peds[i].steps[k].mu_world[1]).epsilon(1e-12));
      CHECK(fa.peds[i].steps[k].position.x ==
            doctest::Approx(fb.peds[i].steps[k].position.x).epsilon(1e-12));
    }
  }
}

TEST_CASE("bd joint NLL equals the sum of its two bivariate blocks")
{
  auto m = MxLstmModel::create(Variant::kBd, small_hp(55));
  Rng rng(13);
  const auto w = random_window(rng, 2, m.hp.t_pred, m.hp.vislet_radius);
  const auto stats = model::sequence_loss(m, w);

  // Reconstruct the same loss through the 4x4 block-diagonal density: run a
  // forecast to recover per-step raw outputs is awkward here, so check the
  // identity at the parameter level instead.
  Rng prng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd out(10);
    for (int k = 0; k < 10; ++k) {
      out[k] = prng.uniform(-1.0, 1.0);
    }
    Eigen::Vector4d target;
    for (int k = 0; k < 4; ++k) {
      target[k] = prng.uniform(-2.0, 2.0);
    }
    gaussian::BivariateParams px{out[0], out[1], out[2], out[3], out[4]};
    gaussian::BivariateParams pa{out[5], out[6], out[7], out[8], out[9]};
    const double sum2 = gaussian::bivariate_nll(px, target[0], target[1]) +
                        gaussian::bivariate_nll(pa, target[2], target[3]);

    // Block-diagonal 4x4 built from the two 2x2 covariances.
    Eigen::Matrix4d sigma = Eigen::Matrix4d::Zero();
    sigma.topLeftCorner<2, 2>() = gaussian::bivariate_sigma(px);
    sigma.bottomRightCorner<2, 2>() = gaussian::bivariate_sigma(pa);
    gaussian::LogCholParams lc;
    lc.mu = Eigen::Vector4d(out[0], out[1], out[5], out[6]);
    lc.theta = gaussian::theta_from_factor(gaussian::upper_cholesky(sigma));
    CHECK(gaussian::nll(lc, target) == doctest::Approx(sum2).epsilon(1e-9));
  }
  CHECK(stats.terms == 2 * m.hp.pred_steps());
}

TEST_CASE("forecast is permutation-equivariant in mean mode")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp(21));
  Rng rng(23);
  auto w = random_window(rng, 4, m.hp.t_pred, m.hp.vislet_radius);
  const auto base = model::forecast(m, w);

  data::SceneWindow permuted = w;
  std::reverse(permuted.peds.begin(), permuted.peds.end());
  const auto swapped = model::forecast(m, permuted);

  for (std::size_t i = 0; i < w.peds.size(); ++i) {
    const auto & a = base.peds[i];
    const auto & b = swapped.peds[w.peds.size() - 1 - i];
    REQUIRE(a.ped_id == b.ped_id);
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
      CHECK(a.steps[k].position.x == doctest::Approx(b.steps[k].position.x).epsilon(1e-9));
      CHECK(a.steps[k].position.y == doctest::Approx(b.steps[k].position.y).epsilon(1e-9));
    }
  }
}

TEST_CASE("every rollout covariance is positive definite")
{
  for (Variant v : {Variant::kFull, Variant::kBd, Variant::kVanilla, Variant::kIndividual}) {
    auto m = MxLstmModel::create(v, small_hp(61));
    Rng rng(29);
    const auto w = random_window(rng, 2, m.hp.t_pred, m.hp.vislet_radius);
    const auto fr = model::forecast(m, w);
    for (const auto & ped : fr.peds) {
      for (const auto & sp : ped.steps) {
        gaussian::LogCholParams p;
        p.mu = sp.mu_world;
        p.theta = sp.theta_world;
        const auto g4 = gaussian::reconstruct(p);
        Eigen::LLT<Eigen::Matrix4d> llt(g4.sigma);
        CHECK(llt.info() == Eigen::Success);
      }
    }
  }
}

TEST_CASE("single-step gradient reduces to the Gaussian head gradient through W_o")
{
  auto hp = small_hp(71);
  hp.t_obs = 1;
  hp.t_pred = 2;  // one step, one loss term
  auto m = MxLstmModel::create(Variant::kIndividual, hp);
  Rng rng(31);
  const auto w = random_window(rng, 1, hp.t_pred, hp.vislet_radius);

  model::Gradients g = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, w, g);

  // Recompute the expected head gradient by hand: out = W_o h + b, d_out from
  // the Gaussian NLL, dW_o = d_out h^T.
  // Forward the single step manually.
  const double s = m.input_scale;
  Eigen::Vector2d nx = Eigen::Vector2d::Zero();  // t=0 offsets are zero
  const Eigen::VectorXd e_x = m.embed_x.forward(nx);
  const Eigen::VectorXd e_a = m.embed_a.forward(Eigen::Vector2d::Zero());
  Eigen::VectorXd input(3 * hp.hidden);
  input << e_x, e_a, Eigen::VectorXd::Zero(hp.hidden);
  nn::LstmCell::StepCache cache;
  Eigen::VectorXd h, c;
  m.lstm.forward(input, Eigen::VectorXd::Zero(hp.hidden), Eigen::VectorXd::Zero(hp.hidden), h, c,
                 cache);
  const Eigen::VectorXd out = m.head.forward(h);
  Eigen::Vector4d target;
  target << (w.peds[0].pos[1].x - w.peds[0].pos[0].x) / s,
    (w.peds[0].pos[1].y - w.peds[0].pos[0].y) / s,
    (w.peds[0].anchor[1].x - w.peds[0].anchor[0].x) / s,
    (w.peds[0].anchor[1].y - w.peds[0].anchor[0].y) / s;
  const Eigen::VectorXd d_out =
    gaussian::nll_grad(Eigen::VectorXd(out.head(4)), Eigen::VectorXd(out.tail(10)),
                       Eigen::VectorXd(target));
  const Eigen::MatrixXd expected = d_out * h.transpose();
  CHECK((g.head_w - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.head_b - d_out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("duplicating a sequence doubles every gradient block")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp(81));
  Rng rng(37);
  const auto w = random_window(rng, 2, m.hp.t_pred, m.hp.vislet_radius);

  model::Gradients once = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, w, once);
  model::Gradients twice = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, w, twice);
  model::sequence_loss_grad(m, w, twice);

  model::Gradients doubled = once;
  doubled.scale(2.0);
  CHECK((twice.lstm_w - doubled.lstm_w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((twice.embed_h_w - doubled.embed_h_w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((twice.head_w - doubled.head_w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradcheck passes on a fresh model and fails when corrupted")
{
  const auto good = gradcheck::run(4242);
  CHECK(good.pass);
  for (const auto & b : good.blocks) {
    CAPTURE(b.name);
    CHECK(b.pass);
    CHECK(b.probes >= 50);
  }
  const auto bad = gradcheck::run(4242, true);
  CHECK_FALSE(bad.pass);
}

TEST_CASE("training a single linear walk halves the per-step NLL")
{
  data::SyntheticSceneSpec spec;
  spec.scenario = data::SyntheticSceneSpec::Scenario::kLinear;
  spec.episodes = 1;
  spec.members = 1;
  spec.seed = 4;
  const auto scene = data::generate_synthetic(spec);
  const auto windows = data::extract_windows(scene, 20, 20);
  REQUIRE(windows.size() == 1);

  auto hp = small_hp(11);
  hp.hidden = 16;
  auto m = MxLstmModel::create(Variant::kIndividual, hp);
  model::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch = 1;
  cfg.shuffle = false;
  nn::AdamOptimizer opt(cfg.opt);
  const auto result = model::train(m, windows, cfg, opt);
  REQUIRE_FALSE(result.diverged);
  REQUIRE(static_cast<int>(result.epoch_mean_nll.size()) == cfg.epochs);
  CHECK(result.epoch_mean_nll.back() < 0.5 * result.epoch_mean_nll.front());
}

TEST_CASE("vanilla variant trains on position-only data")
{
  const auto scene = data::parse_trajectory_text([] {
    std::string text = "# mxcast trajectory v1\n";
    for (int k = 0; k < 20; ++k) {
      char line[64];
      std::snprintf(line, sizeof(line), "%d\t1\t%.3f\t0.000\n", k, 0.3 * k);
      text += line;
    }
    return text;
  }());
  CHECK_FALSE(scene.has_heads);
  const auto windows = data::extract_windows(scene, 20, 20);
  auto m = MxLstmModel::create(Variant::kVanilla, small_hp(17));
  model::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 1;
  nn::AdamOptimizer opt(cfg.opt);
  const auto result = model::train(m, windows, cfg, opt);
  CHECK_FALSE(result.diverged);
  CHECK(result.epoch_mean_nll.size() == 5);
}

TEST_CASE("counterfactual override: no-op when equal to the true vislets")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp(101));
  // A window whose observation vislets all point at exactly 0.3 rad.
  data::SceneWindow w;
  data::PedWindow pw;
  pw.ped_id = 1;
  for (int t = 0; t < m.hp.t_pred; ++t) {
    const Position p{0.1 * t, 0.05 * t};
    pw.pos.push_back(p);
    pw.anchor.push_back(vislet_from_angle(p, HeadAngle(0.3), m.hp.vislet_radius).anchor);
  }
  pw.anchor_in = pw.anchor;
  w.peds.push_back(pw);

  const auto base = model::forecast(m, w);
  const auto cf = model::counterfactual_forecast(m, w, 0.3);
  for (std::size_t k = 0; k < base.peds[0].steps.size(); ++k) {
    CHECK(base.peds[0].steps[k].position.x ==
          doctest::Approx(cf.peds[0].steps[k].position.x).epsilon(1e-12));
    CHECK(base.peds[0].steps[k].position.y ==
          doctest::Approx(cf.peds[0].steps[k].position.y).epsilon(1e-12));
  }
}

TEST_CASE("counterfactual override: zero-weight model ignores it")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp(103));
  for (auto & b : model::param_blocks(m)) {
    if (b.mat != nullptr) {
      b.mat->setZero();
    } else {
      b.vec->setZero();
    }
  }
  Rng rng(41);
  const auto w = random_window(rng, 1, m.hp.t_pred, m.hp.vislet_radius);
  const auto a = model::counterfactual_forecast(m, w, 0.0);
  const auto b = model::counterfactual_forecast(m, w, 3.0);
  for (std::size_t k = 0; k < a.peds[0].steps.size(); ++k) {
    CHECK(a.peds[0].steps[k].position.x == b.peds[0].steps[k].position.x);
    CHECK(a.peds[0].steps[k].position.y == b.peds[0].steps[k].position.y);
  }
}

TEST_CASE("counterfactual override changes a trained model's prediction")
{
  data::SyntheticSceneSpec spec;
  spec.scenario = data::SyntheticSceneSpec::Scenario::kTurnWithHeadLead;
  spec.episodes = 40;
  spec.members = 1;
  spec.seed = 6;
  const auto scene = data::generate_synthetic(spec);
  const auto windows = data::extract_windows(scene, 20, 20);

  auto hp = small_hp(5);
  hp.hidden = 16;
  auto m = MxLstmModel::create(Variant::kIndividual, hp);
  model::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch = 8;
  nn::AdamOptimizer opt(cfg.opt);
  const auto result = model::train(m, windows, cfg, opt);
  REQUIRE_FALSE(result.diverged);

  const auto & probe = windows.front();
  const auto base = model::forecast(m, probe);
  const double motion =
    movement_angle(probe.peds[0].pos[6], probe.peds[0].pos[7]).alpha;
  const auto flipped = model::counterfactual_forecast(m, probe, wrap_angle(motion + M_PI));
  double displacement = 0.0;
  for (std::size_t k = 0; k < base.peds[0].steps.size(); ++k) {
    displacement += distance(base.peds[0].steps[k].position, flipped.peds[0].steps[k].position);
  }
  CHECK(displacement > 1e-3);
}

TEST_CASE("batch gradient equals the sum of per-sequence gradients")
{
  auto m = MxLstmModel::create(Variant::kFull, small_hp(111));
  Rng rng(47);
  const auto w1 = random_window(rng, 2, m.hp.t_pred, m.hp.vislet_radius);
  const auto w2 = random_window(rng, 3, m.hp.t_pred, m.hp.vislet_radius);

  model::Gradients acc = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, w1, acc);
  model::sequence_loss_grad(m, w2, acc);

  model::Gradients a = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, w1, a);
  model::Gradients b = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, w2, b);
  a.add(b);
  // Equal up to summation order.
  CHECK((acc.lstm_w - a.lstm_w).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((acc.embed_x_w - a.embed_x_w).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((acc.head_w - a.head_w).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("checkpoint round trip is bit-exact including the optimizer")
{
  data::SyntheticSceneSpec spec;
  spec.scenario = data::SyntheticSceneSpec::Scenario::kLinear;
  spec.episodes = 4;
  spec.seed = 10;
  const auto scene = data::generate_synthetic(spec);
  const auto windows = data::extract_windows(scene, 20, 20);

  auto m = MxLstmModel::create(Variant::kFull, small_hp(201));
  model::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 2;
  nn::AdamOptimizer opt(cfg.opt);
  model::train(m, windows, cfg, opt);

  const std::string path = "test_ckpt.bin";
  model::save_checkpoint(path, m, &opt, 3);
  auto ck = model::load_checkpoint(path);
  CHECK(ck.model.variant == m.variant);
  CHECK(ck.epochs_done == 3);
  CHECK(ck.model.input_scale == m.input_scale);
  CHECK((ck.model.lstm.weight - m.lstm.weight).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ck.model.embed_h.weight - m.embed_h.weight).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ck.model.head.bias - m.head.bias).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(ck.has_optimizer);
  CHECK(ck.optimizer.step_count() == opt.step_count());
  CHECK((ck.optimizer.moments_m()[0] - opt.moments_m()[0]).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("resumed training continues exactly like an uninterrupted run")
{
  data::SyntheticSceneSpec spec;
  spec.scenario = data::SyntheticSceneSpec::Scenario::kLinear;
  spec.episodes = 6;
  spec.seed = 12;
  const auto scene = data::generate_synthetic(spec);
  const auto windows = data::extract_windows(scene, 20, 20);

  model::TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch = 2;

  auto straight = MxLstmModel::create(Variant::kIndividual, small_hp(77));
  nn::AdamOptimizer opt_a(cfg.opt);
  const auto full_run = model::train(straight, windows, cfg, opt_a);

  auto part = MxLstmModel::create(Variant::kIndividual, small_hp(77));
  nn::AdamOptimizer opt_b(cfg.opt);
  model::TrainConfig first = cfg;
  first.epochs = 3;
  model::train(part, windows, first, opt_b);
  model::TrainConfig second = cfg;
  second.epochs = 3;
  second.start_epoch = 3;
  second.compute_scale = false;
  const auto resumed = model::train(part, windows, second, opt_b);

  CHECK((part.lstm.weight - straight.lstm.weight).cwiseAbs().maxCoeff() == 0.0);
  CHECK(resumed.epoch_mean_nll.back() ==
        doctest::Approx(full_run.epoch_mean_nll.back()).epsilon(1e-15));
}
