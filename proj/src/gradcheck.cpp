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

#include "mxcast/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mxcast/data.hpp"
#include "mxcast/gaussian.hpp"
#include "mxcast/model.hpp"
#include "mxcast/nn.hpp"
#include "mxcast/rng.hpp"

namespace mxcast::gradcheck {

namespace {

constexpr double kStep = 1e-5;

// Comparison floor keeps finite-difference roundoff from dominating entries
// whose true gradient is tiny.
double rel_err(double analytic, double fd, double floor_val)
{
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor_val});
}

BlockReport check_gaussian_nll(std::uint64_t seed, bool corrupt)
{
  BlockReport r{"gaussian4_nll", 0.0, 1e-4, 0, false};
  Rng rng(seed);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd mu(4), theta(10), target(4);
    for (int k = 0; k < 4; ++k) {
      mu[k] = rng.uniform(-2.0, 2.0);
      target[k] = rng.uniform(-2.0, 2.0);
    }
    for (int k = 0; k < 10; ++k) {
      theta[k] = rng.uniform(-1.5, 1.5);
    }
    Eigen::VectorXd grad = gaussian::nll_grad(mu, theta, target);
    if (corrupt && trial == 0) {
      grad[0] += 0.5;
    }
    for (int k = 0; k < 14; ++k) {
      Eigen::VectorXd mp = mu, mm = mu, tp = theta, tm = theta;
      if (k < 4) {
        mp[k] += kStep;
        mm[k] -= kStep;
      } else {
        tp[k - 4] += kStep;
        tm[k - 4] -= kStep;
      }
      const double fd =
        (gaussian::nll(mp, tp, target) - gaussian::nll(mm, tm, target)) / (2.0 * kStep);
      r.worst_rel = std::max(r.worst_rel, rel_err(grad[k], fd, 1e-3));
      ++r.probes;
    }
  }
  r.pass = r.worst_rel <= r.tolerance;
  return r;
}

BlockReport check_bivariate_nll(std::uint64_t seed, bool corrupt)
{
  BlockReport r{"bivariate_nll", 0.0, 1e-4, 0, false};
  Rng rng(seed + 1);
  for (int trial = 0; trial < 500; ++trial) {
    double vals[5];
    for (double & v : vals) {
      v = rng.uniform(-1.5, 1.5);
    }
    const double t1 = rng.uniform(-2.0, 2.0);
    const double t2 = rng.uniform(-2.0, 2.0);
    gaussian::BivariateParams p{vals[0], vals[1], vals[2], vals[3], vals[4]};
    Eigen::Matrix<double, 5, 1> grad = gaussian::bivariate_nll_grad(p, t1, t2);
    if (corrupt && trial == 0) {
      grad[2] *= 1.5;
    }
    for (int k = 0; k < 5; ++k) {
      double vp[5], vm[5];
      for (int j = 0; j < 5; ++j) {
        vp[j] = vals[j];
        vm[j] = vals[j];
      }
      vp[k] += kStep;
      vm[k] -= kStep;
      gaussian::BivariateParams pp{vp[0], vp[1], vp[2], vp[3], vp[4]};
      gaussian::BivariateParams pm{vm[0], vm[1], vm[2], vm[3], vm[4]};
      const double fd =
        (gaussian::bivariate_nll(pp, t1, t2) - gaussian::bivariate_nll(pm, t1, t2)) /
        (2.0 * kStep);
      r.worst_rel = std::max(r.worst_rel, rel_err(grad[k], fd, 1e-3));
      ++r.probes;
    }
  }
  r.pass = r.worst_rel <= r.tolerance;
  return r;
}

BlockReport check_embedding(std::uint64_t seed)
{
  BlockReport r{"embedding", 0.0, 1e-4, 0, false};
  Rng rng(seed + 2);
  const int d = 6;
  nn::EmbeddingLayer layer(d, 3);
  layer.init(rng);
  for (Eigen::Index k = 0; k < layer.bias.size(); ++k) {
    layer.bias[k] = rng.uniform(-0.5, 0.5);
  }

  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd input(3);
    for (int k = 0; k < 3; ++k) {
      input[k] = rng.uniform(-2.0, 2.0);
    }
    // Scalar objective: dot(e, probe).
    Eigen::VectorXd probe(d);
    for (int k = 0; k < d; ++k) {
      probe[k] = rng.uniform(-1.0, 1.0);
    }
    Eigen::VectorXd pre;
    layer.forward(input, pre);
    Eigen::MatrixXd d_w = Eigen::MatrixXd::Zero(d, 3);
    Eigen::VectorXd d_b = Eigen::VectorXd::Zero(d);
    layer.backward(probe, pre, input, d_w, d_b);

    for (int probe_idx = 0; probe_idx < 8; ++probe_idx) {
      const int i = static_cast<int>(rng.uniform_int(d));
      const int j = static_cast<int>(rng.uniform_int(3));
      const double saved = layer.weight(i, j);
      layer.weight(i, j) = saved + kStep;
      const double up = probe.dot(layer.forward(input));
      layer.weight(i, j) = saved - kStep;
      const double dn = probe.dot(layer.forward(input));
      layer.weight(i, j) = saved;
      const double fd = (up - dn) / (2.0 * kStep);
      r.worst_rel = std::max(r.worst_rel, rel_err(d_w(i, j), fd, 1e-3));
      ++r.probes;
    }
  }
  r.pass = r.worst_rel <= r.tolerance;
  return r;
}

BlockReport check_lstm_cell(std::uint64_t seed)
{
  BlockReport r{"lstm_cell", 0.0, 1e-4, 0, false};
  Rng rng(seed + 3);
  const int d = 5, in = 4;
  nn::LstmCell cell(d, in);
  cell.init(rng);

  for (int trial = 0; trial < 30; ++trial) {
    Eigen::VectorXd input(in), h0(d), c0(d), probe(d);
    for (int k = 0; k < in; ++k) input[k] = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < d; ++k) {
      h0[k] = rng.uniform(-0.8, 0.8);
      c0[k] = rng.uniform(-0.8, 0.8);
      probe[k] = rng.uniform(-1.0, 1.0);
    }
    nn::LstmCell::StepCache cache;
    Eigen::VectorXd h, c;
    cell.forward(input, h0, c0, h, c, cache);
    Eigen::MatrixXd d_w = Eigen::MatrixXd::Zero(cell.weight.rows(), cell.weight.cols());
    Eigen::VectorXd d_b = Eigen::VectorXd::Zero(cell.bias.size());
    Eigen::VectorXd d_in, d_h0, d_c0;
    cell.backward(cache, probe, Eigen::VectorXd::Zero(d), d_w, d_b, d_in, d_h0, d_c0);

    auto objective = [&]() {
      nn::LstmCell::StepCache tmp;
      Eigen::VectorXd hh, cc;
      cell.forward(input, h0, c0, hh, cc, tmp);
      return probe.dot(hh);
    };
    for (int probe_idx = 0; probe_idx < 10; ++probe_idx) {
      const int i = static_cast<int>(rng.uniform_int(cell.weight.rows()));
      const int j = static_cast<int>(rng.uniform_int(cell.weight.cols()));
      const double saved = cell.weight(i, j);
      cell.weight(i, j) = saved + kStep;
      const double up = objective();
      cell.weight(i, j) = saved - kStep;
      const double dn = objective();
      cell.weight(i, j) = saved;
      const double fd = (up - dn) / (2.0 * kStep);
      r.worst_rel = std::max(r.worst_rel, rel_err(d_w(i, j), fd, 1e-3));
      ++r.probes;
    }
    // Also probe the recurrent input path.
    for (int probe_idx = 0; probe_idx < 4; ++probe_idx) {
      const int k = static_cast<int>(rng.uniform_int(d));
      const double saved = h0[k];
      h0[k] = saved + kStep;
      const double up = objective();
      h0[k] = saved - kStep;
      const double dn = objective();
      h0[k] = saved;
      const double fd = (up - dn) / (2.0 * kStep);
      r.worst_rel = std::max(r.worst_rel, rel_err(d_h0[k], fd, 1e-3));
      ++r.probes;
    }
  }
  r.pass = r.worst_rel <= r.tolerance;
  return r;
}

// Random multi-pedestrian scene exercising pooling, with every pedestrian
// inside everybody's potential neighborhood.
data::SceneWindow random_window(Rng & rng, int peds, int frames, double radius)
{
  data::SceneWindow w;
  w.start_frame = 0;
  for (int i = 0; i < peds; ++i) {
    data::PedWindow pw;
    pw.ped_id = i + 1;
    Position p{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    for (int t = 0; t < frames; ++t) {
      p.x += rng.uniform(-0.3, 0.3);
      p.y += rng.uniform(-0.3, 0.3);
      const double alpha = rng.uniform(-M_PI, M_PI);
      pw.pos.push_back(p);
      pw.anchor.push_back(vislet_from_angle(p, HeadAngle(alpha), radius).anchor);
    }
    pw.anchor_in = pw.anchor;
    w.peds.push_back(std::move(pw));
  }
  return w;
}

std::vector<BlockReport> check_bptt(std::uint64_t seed, bool corrupt)
{
  model::Hyperparams hp;
  hp.hidden = 8;
  hp.grid_cells = 8;
  hp.cell_size = 0.5;
  hp.t_obs = 8;
  hp.t_pred = 20;
  hp.seed = seed + 4;
  auto m = model::MxLstmModel::create(model::Variant::kFull, hp);
  m.input_scale = 0.25;

  Rng rng(seed + 5);
  // Jitter the biases off their zero init: the ReLU kink otherwise sits
  // exactly at the zero-offset first step and finite differences straddle it.
  for (Eigen::VectorXd * b : {&m.embed_x.bias, &m.embed_a.bias, &m.embed_h.bias}) {
    for (Eigen::Index k = 0; k < b->size(); ++k) {
      (*b)[k] = rng.uniform(-0.2, 0.2);
    }
  }

  const auto window = random_window(rng, 3, hp.t_pred, hp.vislet_radius);

  model::Gradients grads = model::Gradients::zeros_like(m);
  model::sequence_loss_grad(m, window, grads);
  if (corrupt) {
    grads.lstm_w(0, 0) += 0.25;
  }

  auto params = model::param_blocks(m);
  auto gblocks = model::grad_blocks(grads, m);

  std::vector<BlockReport> reports;
  for (std::size_t b = 0; b < params.size(); ++b) {
    BlockReport r{"bptt_" + params[b].name, 0.0, 1e-3, 0, false};
    const Eigen::Index rows = params[b].mat != nullptr ? params[b].mat->rows()
                                                       : params[b].vec->size();
    const Eigen::Index cols = params[b].mat != nullptr ? params[b].mat->cols() : 1;
    for (int probe = 0; probe < 50; ++probe) {
      const Eigen::Index i = static_cast<Eigen::Index>(rng.uniform_int(rows));
      const Eigen::Index j = static_cast<Eigen::Index>(rng.uniform_int(cols));
      double * slot = params[b].mat != nullptr ? &(*params[b].mat)(i, j) : &(*params[b].vec)(i);
      const double analytic =
        gblocks[b].mat != nullptr ? (*gblocks[b].mat)(i, j) : (*gblocks[b].vec)(i);
      const double saved = *slot;
      *slot = saved + kStep;
      const double up = model::sequence_loss(m, window).total;
      *slot = saved - kStep;
      const double dn = model::sequence_loss(m, window).total;
      *slot = saved;
      const double fd = (up - dn) / (2.0 * kStep);
      r.worst_rel = std::max(r.worst_rel, rel_err(analytic, fd, 1e-2));
      ++r.probes;
    }
    r.pass = r.worst_rel <= r.tolerance;
    reports.push_back(r);
  }
  return reports;
}

}  // namespace

Report run(std::uint64_t seed, bool corrupt)
{
  Report report;
  report.blocks.push_back(check_gaussian_nll(seed, corrupt));
  report.blocks.push_back(check_bivariate_nll(seed, corrupt));
  report.blocks.push_back(check_embedding(seed));
  report.blocks.push_back(check_lstm_cell(seed));
  for (auto & b : check_bptt(seed, corrupt)) {
    report.blocks.push_back(std::move(b));
  }
  for (const auto & b : report.blocks) {
    report.pass = report.pass && b.pass;
  }
  return report;
}

std::string report_text(const Report & r)
{
  std::ostringstream out;
  out << "# gradient check (central differences, h=1e-5)\n";
  for (const auto & b : r.blocks) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s probes %4d  worst_rel %.3e  tol %.0e  %s\n",
                  b.name.c_str(), b.probes, b.worst_rel, b.tolerance,
                  b.pass ? "PASS" : "FAIL");
    out << line;
  }
  out << (r.pass ? "RESULT PASS\n" : "RESULT FAIL\n");
  return out.str();
}

}  // namespace mxcast::gradcheck
