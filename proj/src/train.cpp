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

#include <cmath>
#include <future>
#include <numeric>

#include "mxcast/model.hpp"

namespace mxcast::model {

double compute_input_scale(const std::vector<data::SceneWindow> & windows)
{
  double sum = 0.0;
  double sum_sq = 0.0;
  long n = 0;
  for (const auto & w : windows) {
    for (const auto & pw : w.peds) {
      for (std::size_t t = 1; t < pw.pos.size(); ++t) {
        const double vals[4] = {pw.pos[t].x - pw.pos[t - 1].x, pw.pos[t].y - pw.pos[t - 1].y,
                                pw.anchor[t].x - pw.anchor[t - 1].x,
                                pw.anchor[t].y - pw.anchor[t - 1].y};
        for (double v : vals) {
          sum += v;
          sum_sq += v * v;
          n += 1;
        }
      }
    }
  }
  if (n < 2) {
    return 1.0;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - mean * mean;
  const double sd = std::sqrt(std::max(0.0, var));
  return sd > 1e-8 ? sd : 1.0;
}

namespace {

// Head-noise augmentation: perturb only the input anchors, keep targets clean.
data::SceneWindow augment_window(const data::SceneWindow & w, double sigma_deg, double radius,
                                 std::uint64_t seed)
{
  data::SceneWindow out = w;
  Rng rng(seed);
  const double sigma = deg_to_rad(sigma_deg);
  for (auto & pw : out.peds) {
    for (std::size_t t = 0; t < pw.anchor_in.size(); ++t) {
      const Vislet v{pw.anchor_in[t], pw.pos[t]};
      const double alpha = wrap_angle(angle_from_vislet(v).alpha + sigma * rng.normal());
      pw.anchor_in[t] = vislet_from_angle(pw.pos[t], HeadAngle(alpha), radius).anchor;
    }
  }
  return out;
}

SsPlan make_ss_plan(const data::SceneWindow & w, int t_pred, double prob, std::uint64_t seed)
{
  SsPlan plan(t_pred - 1, std::vector<char>(w.peds.size(), 0));
  Rng rng(seed);
  for (auto & row : plan) {
    for (auto & flag : row) {
      flag = rng.uniform() < prob ? 1 : 0;
    }
  }
  return plan;
}

}  // namespace

TrainResult train(MxLstmModel & m, const std::vector<data::SceneWindow> & windows,
                  const TrainConfig & cfg, nn::AdamOptimizer & opt,
                  const std::function<void(int, double)> & on_epoch)
{
  TrainResult result;
  if (windows.empty()) {
    result.note = "no training windows";
    return result;
  }
  if (cfg.compute_scale && opt.step_count() == 0) {
    m.input_scale = compute_input_scale(windows);
  }

  // Optimizer moment blocks, one per parameter block, in serialization order.
  auto params = param_blocks(m);
  if (opt.moments_m().empty()) {
    for (const auto & b : params) {
      if (b.mat != nullptr) {
        opt.add_block(b.mat->rows(), b.mat->cols());
      } else {
        opt.add_block(b.vec->size(), 1);
      }
    }
  }

  const int n = static_cast<int>(windows.size());
  const int threads = std::max(1, cfg.threads);

  for (int epoch = cfg.start_epoch; epoch < cfg.start_epoch + cfg.epochs; ++epoch) {
    Rng erng(Rng::derive(m.hp.seed, 0x45504F43ull + static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
      for (int k = n - 1; k > 0; --k) {
        const int j = static_cast<int>(erng.uniform_int(static_cast<std::uint64_t>(k) + 1));
        std::swap(order[k], order[j]);
      }
    }

    double epoch_loss = 0.0;
    long epoch_terms = 0;
    bool bad = false;

    for (int start = 0; start < n && !bad; start += cfg.batch) {
      const int count = std::min(cfg.batch, n - start);

      auto job = [&](int k) -> std::pair<Gradients, LossStats> {
        const int w_idx = order[start + k];
        const std::uint64_t w_seed =
          Rng::derive(m.hp.seed, (static_cast<std::uint64_t>(epoch) << 32) ^
                                   static_cast<std::uint64_t>(w_idx));
        const data::SceneWindow * win = &windows[w_idx];
        data::SceneWindow noised;
        if (cfg.noise_aug_sigma_deg > 0.0) {
          noised = augment_window(*win, cfg.noise_aug_sigma_deg, m.hp.vislet_radius, w_seed);
          win = &noised;
        }
        SsPlan plan;
        const SsPlan * plan_ptr = nullptr;
        if (cfg.scheduled_sampling > 0.0) {
          plan = make_ss_plan(*win, m.hp.t_pred, cfg.scheduled_sampling, w_seed ^ 0x5353ull);
          plan_ptr = &plan;
        }
        Gradients g = Gradients::zeros_like(m);
        const LossStats ls = sequence_loss_grad(m, *win, g, plan_ptr);
        return {std::move(g), ls};
      };

      Gradients batch_grads = Gradients::zeros_like(m);
      LossStats batch_stats;
      if (threads == 1) {
        for (int k = 0; k < count; ++k) {
          auto [g, ls] = job(k);
          batch_grads.add(g);
          batch_stats.total += ls.total;
          batch_stats.terms += ls.terms;
        }
      } else {
        // Static assignment: thread w handles jobs w, w+threads, ...; thread
        // buffers are reduced in thread order so results do not depend on
        // scheduling.
        std::vector<std::future<std::pair<Gradients, LossStats>>> futures;
        futures.reserve(threads);
        for (int w = 0; w < threads; ++w) {
          futures.push_back(std::async(std::launch::async, [&, w]() {
            Gradients acc = Gradients::zeros_like(m);
            LossStats ls_acc;
            for (int k = w; k < count; k += threads) {
              auto [g, ls] = job(k);
              acc.add(g);
              ls_acc.total += ls.total;
              ls_acc.terms += ls.terms;
            }
            return std::make_pair(std::move(acc), ls_acc);
          }));
        }
        for (auto & f : futures) {
          auto [g, ls] = f.get();
          batch_grads.add(g);
          batch_stats.total += ls.total;
          batch_stats.terms += ls.terms;
        }
      }

      epoch_loss += batch_stats.total;
      epoch_terms += batch_stats.terms;
      if (!std::isfinite(batch_stats.total)) {
        result.diverged = true;
        result.note = "non-finite loss at epoch " + std::to_string(epoch);
        bad = true;
        break;
      }

      if (cfg.clip_norm > 0.0) {
        const double norm = std::sqrt(batch_grads.squared_norm());
        if (norm > cfg.clip_norm) {
          batch_grads.scale(cfg.clip_norm / norm);
        }
      }

      auto gblocks = grad_blocks(batch_grads, m);
      try {
        for (std::size_t b = 0; b < params.size(); ++b) {
          if (params[b].mat != nullptr) {
            opt.update_block(static_cast<int>(b), *params[b].mat, *gblocks[b].mat);
          } else {
            Eigen::MatrixXd pv = *params[b].vec;
            opt.update_block(static_cast<int>(b), pv, Eigen::MatrixXd(*gblocks[b].vec));
            *params[b].vec = pv.col(0);
          }
        }
      } catch (const nn::training_divergence_error & e) {
        result.diverged = true;
        result.note = e.what();
        bad = true;
        break;
      }
      opt.advance();
      result.steps += 1;
    }

    const double mean_nll =
      epoch_terms > 0 ? epoch_loss / static_cast<double>(epoch_terms) : 0.0;
    result.epoch_mean_nll.push_back(mean_nll);
    if (result.diverged || !std::isfinite(mean_nll)) {
      result.diverged = true;
      if (result.note.empty()) {
        result.note = "non-finite epoch loss";
      }
      break;
    }
    if (on_epoch) {
      on_epoch(epoch, mean_nll);
    }
  }
  return result;
}

}  // namespace mxcast::model
