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

#include "mxcast/model.hpp"

#include <cmath>
#include <map>

namespace mxcast::model {

using Eigen::MatrixXd;
using Eigen::Vector4d;
using Eigen::VectorXd;

Variant variant_from_string(const std::string & name)
{
  if (name == "full") return Variant::kFull;
  if (name == "bd") return Variant::kBd;
  if (name == "no_frustum") return Variant::kNoFrustum;
  if (name == "individual") return Variant::kIndividual;
  if (name == "vanilla") return Variant::kVanilla;
  throw std::invalid_argument("unknown variant: " + name);
}

std::string variant_to_string(Variant v)
{
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kBd: return "bd";
    case Variant::kNoFrustum: return "no_frustum";
    case Variant::kIndividual: return "individual";
    case Variant::kVanilla: return "vanilla";
  }
  return "unknown";
}

double Hyperparams::gamma_rad() const { return deg_to_rad(gamma_deg); }

MxLstmModel MxLstmModel::create(Variant variant, const Hyperparams & hp)
{
  MxLstmModel m;
  m.variant = variant;
  m.hp = hp;
  const int d = hp.hidden;

  Rng rng(hp.seed);
  m.embed_x = nn::EmbeddingLayer(d, 2);
  m.embed_x.init(rng);
  if (m.uses_vislets()) {
    m.embed_a = nn::EmbeddingLayer(d, 2);
    m.embed_a.init(rng);
  }
  if (m.uses_pooling()) {
    const Eigen::Index pool_in =
      static_cast<Eigen::Index>(hp.grid_cells) * hp.grid_cells * d;
    m.embed_h = nn::EmbeddingLayer(d, static_cast<int>(pool_in));
    m.embed_h.init(rng);
  }
  m.lstm = nn::LstmCell(d, 3 * d);
  m.lstm.init(rng);
  m.head = nn::OutputLayer(m.head_dim(), d);
  m.head.init(rng);
  return m;
}

Gradients Gradients::zeros_like(const MxLstmModel & m)
{
  Gradients g;
  g.embed_x_w = MatrixXd::Zero(m.embed_x.weight.rows(), m.embed_x.weight.cols());
  g.embed_x_b = VectorXd::Zero(m.embed_x.bias.size());
  g.embed_a_w = MatrixXd::Zero(m.embed_a.weight.rows(), m.embed_a.weight.cols());
  g.embed_a_b = VectorXd::Zero(m.embed_a.bias.size());
  g.embed_h_w = MatrixXd::Zero(m.embed_h.weight.rows(), m.embed_h.weight.cols());
  g.embed_h_b = VectorXd::Zero(m.embed_h.bias.size());
  g.lstm_w = MatrixXd::Zero(m.lstm.weight.rows(), m.lstm.weight.cols());
  g.lstm_b = VectorXd::Zero(m.lstm.bias.size());
  g.head_w = MatrixXd::Zero(m.head.weight.rows(), m.head.weight.cols());
  g.head_b = VectorXd::Zero(m.head.bias.size());
  return g;
}

void Gradients::set_zero()
{
  embed_x_w.setZero();
  embed_x_b.setZero();
  embed_a_w.setZero();
  embed_a_b.setZero();
  embed_h_w.setZero();
  embed_h_b.setZero();
  lstm_w.setZero();
  lstm_b.setZero();
  head_w.setZero();
  head_b.setZero();
}

void Gradients::add(const Gradients & o)
{
  embed_x_w += o.embed_x_w;
  embed_x_b += o.embed_x_b;
  embed_a_w += o.embed_a_w;
  embed_a_b += o.embed_a_b;
  embed_h_w += o.embed_h_w;
  embed_h_b += o.embed_h_b;
  lstm_w += o.lstm_w;
  lstm_b += o.lstm_b;
  head_w += o.head_w;
  head_b += o.head_b;
}

void Gradients::scale(double s)
{
  embed_x_w *= s;
  embed_x_b *= s;
  embed_a_w *= s;
  embed_a_b *= s;
  embed_h_w *= s;
  embed_h_b *= s;
  lstm_w *= s;
  lstm_b *= s;
  head_w *= s;
  head_b *= s;
}

double Gradients::squared_norm() const
{
  return embed_x_w.squaredNorm() + embed_x_b.squaredNorm() + embed_a_w.squaredNorm() +
         embed_a_b.squaredNorm() + embed_h_w.squaredNorm() + embed_h_b.squaredNorm() +
         lstm_w.squaredNorm() + lstm_b.squaredNorm() + head_w.squaredNorm() +
         head_b.squaredNorm();
}

std::vector<ParamBlock> param_blocks(MxLstmModel & m)
{
  std::vector<ParamBlock> blocks;
  blocks.push_back({"W_x", &m.embed_x.weight, nullptr});
  blocks.push_back({"b_x", nullptr, &m.embed_x.bias});
  if (m.uses_vislets()) {
    blocks.push_back({"W_a", &m.embed_a.weight, nullptr});
    blocks.push_back({"b_a", nullptr, &m.embed_a.bias});
  }
  if (m.uses_pooling()) {
    blocks.push_back({"W_H", &m.embed_h.weight, nullptr});
    blocks.push_back({"b_H", nullptr, &m.embed_h.bias});
  }
  blocks.push_back({"W_lstm", &m.lstm.weight, nullptr});
  blocks.push_back({"b_lstm", nullptr, &m.lstm.bias});
  blocks.push_back({"W_o", &m.head.weight, nullptr});
  blocks.push_back({"b_o", nullptr, &m.head.bias});
  return blocks;
}

std::vector<ParamBlock> grad_blocks(Gradients & g, const MxLstmModel & m)
{
  std::vector<ParamBlock> blocks;
  blocks.push_back({"W_x", &g.embed_x_w, nullptr});
  blocks.push_back({"b_x", nullptr, &g.embed_x_b});
  if (m.uses_vislets()) {
    blocks.push_back({"W_a", &g.embed_a_w, nullptr});
    blocks.push_back({"b_a", nullptr, &g.embed_a_b});
  }
  if (m.uses_pooling()) {
    blocks.push_back({"W_H", &g.embed_h_w, nullptr});
    blocks.push_back({"b_H", nullptr, &g.embed_h_b});
  }
  blocks.push_back({"W_lstm", &g.lstm_w, nullptr});
  blocks.push_back({"b_lstm", nullptr, &g.lstm_b});
  blocks.push_back({"W_o", &g.head_w, nullptr});
  blocks.push_back({"b_o", nullptr, &g.head_b});
  return blocks;
}

namespace {

// Packed theta slot layout of the 4x4 upper triangle, used to address the
// 2x2 position marginal: slots {0, 1, 4} hold (0,0), (0,1), (1,1).
constexpr int kMarginalSlots[3] = {0, 1, 4};

struct HeadLoss {
  double nll{0.0};
  VectorXd d_out;
};

// NLL of the target offsets under the raw head outputs, plus the gradient
// w.r.t. those outputs. Layouts:
//   full/no_frustum/individual/vanilla: [mu(4) | theta(10)]
//   bd: [mu_x, mu_y, log s1, log s2, rho | same for the anchor block]
// vanilla scores only the 2x2 position marginal of its 4-variate head.
HeadLoss head_loss(const MxLstmModel & m, const VectorXd & out, const Vector4d & target)
{
  HeadLoss hl;
  hl.d_out = VectorXd::Zero(out.size());
  switch (m.variant) {
    case Variant::kBd: {
      for (int block = 0; block < 2; ++block) {
        gaussian::BivariateParams p;
        p.mu1 = out[5 * block + 0];
        p.mu2 = out[5 * block + 1];
        p.log_sigma1 = out[5 * block + 2];
        p.log_sigma2 = out[5 * block + 3];
        p.rho_raw = out[5 * block + 4];
        const double t1 = target[2 * block + 0];
        const double t2 = target[2 * block + 1];
        hl.nll += gaussian::bivariate_nll(p, t1, t2);
        hl.d_out.segment(5 * block, 5) = gaussian::bivariate_nll_grad(p, t1, t2);
      }
      break;
    }
    case Variant::kVanilla: {
      Eigen::Vector2d mu2(out[0], out[1]);
      Eigen::Vector3d theta2(out[4 + kMarginalSlots[0]], out[4 + kMarginalSlots[1]],
                             out[4 + kMarginalSlots[2]]);
      Eigen::Vector2d t2(target[0], target[1]);
      hl.nll = gaussian::nll(mu2, theta2, t2);
      const VectorXd g = gaussian::nll_grad(mu2, theta2, t2);
      hl.d_out[0] = g[0];
      hl.d_out[1] = g[1];
      for (int k = 0; k < 3; ++k) {
        hl.d_out[4 + kMarginalSlots[k]] = g[2 + k];
      }
      break;
    }
    default: {
      const VectorXd mu = out.head(4);
      const VectorXd theta = out.tail(10);
      hl.nll = gaussian::nll(mu, theta, VectorXd(target));
      hl.d_out = gaussian::nll_grad(mu, theta, VectorXd(target));
      break;
    }
  }
  return hl;
}

struct StepPedCache {
  VectorXd nx, na;
  VectorXd pre_x, e_x, pre_a, e_a, pre_h, e_h;
  std::vector<std::pair<int, VectorXd>> pool_cells;  // flat cell -> summed h
  std::vector<std::pair<int, int>> pool_members;     // (ped index, flat cell)
  nn::LstmCell::StepCache lstm;
  VectorXd h, c;
  bool has_loss{false};
  VectorXd d_out;  // head-output gradient, filled during the forward pass
};

Eigen::Vector2d to_vec(const Position & p) { return {p.x, p.y}; }

// Per-variant mean of the predicted next-offset distribution.
Vector4d head_mu(Variant variant, const VectorXd & out)
{
  if (variant == Variant::kBd) {
    return {out[0], out[1], out[5], out[6]};
  }
  if (variant == Variant::kVanilla) {
    return {out[0], out[1], 0.0, 0.0};
  }
  return out.head(4);
}

// Sparse W_H product: bias + sum over populated cells of the cell's column
// block times the pooled state.
VectorXd pool_embed_pre(const nn::EmbeddingLayer & layer, int d,
                        const std::vector<std::pair<int, VectorXd>> & cells)
{
  VectorXd pre = layer.bias;
  for (const auto & [cell, hsum] : cells) {
    pre.noalias() += layer.weight.middleCols(static_cast<Eigen::Index>(cell) * d, d) * hsum;
  }
  return pre;
}

}  // namespace

// Shared forward pass over one scene window under teacher forcing (with an
// optional scheduled-sampling plan). When `cache` is non-null every
// intermediate needed by the backward pass is recorded.
static LossStats forward_window(const MxLstmModel & m, const data::SceneWindow & window,
                                std::vector<std::vector<StepPedCache>> * cache,
                                const SsPlan * ss)
{
  const int d = m.hp.hidden;
  const int t_total = m.hp.t_pred;
  const int p_count = static_cast<int>(window.peds.size());
  const double s = m.input_scale;

  for (const auto & pw : window.peds) {
    if (static_cast<int>(pw.pos.size()) < t_total) {
      throw std::invalid_argument("sequence shorter than t_pred");
    }
  }

  LossStats stats;
  std::vector<VectorXd> h_prev(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> c_prev(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> h_next(p_count), c_next(p_count);
  std::vector<Vector4d> mu_pred(p_count, Vector4d::Zero());

  if (cache != nullptr) {
    cache->assign(t_total - 1, std::vector<StepPedCache>(p_count));
  }
  std::vector<StepPedCache> scratch(cache == nullptr ? p_count : 0);

  for (int t = 0; t + 1 < t_total; ++t) {
    for (int i = 0; i < p_count; ++i) {
      StepPedCache & sc = cache != nullptr ? (*cache)[t][i] : scratch[i];
      const auto & pw = window.peds[i];

      sc.nx = t == 0 ? Eigen::Vector2d::Zero()
                     : Eigen::Vector2d((to_vec(pw.pos[t]) - to_vec(pw.pos[t - 1])) / s);
      sc.na = (!m.uses_vislets() || t == 0)
                ? Eigen::Vector2d::Zero()
                : Eigen::Vector2d((to_vec(pw.anchor_in[t]) - to_vec(pw.anchor_in[t - 1])) / s);
      if (ss != nullptr && t >= m.hp.t_obs && (*ss)[t][i]) {
        // Feed back the previous predicted mean, detached.
        sc.nx = mu_pred[i].head<2>();
        if (m.uses_vislets()) {
          sc.na = mu_pred[i].tail<2>();
        }
      }

      sc.e_x = m.embed_x.forward(sc.nx, sc.pre_x);
      sc.e_a = m.uses_vislets() ? m.embed_a.forward(sc.na, sc.pre_a) : VectorXd::Zero(d);

      if (m.uses_pooling()) {
        std::vector<pooling::Neighbor> others;
        std::vector<int> other_ped;
        others.reserve(p_count - 1);
        for (int j = 0; j < p_count; ++j) {
          if (j == i) {
            continue;
          }
          others.push_back({window.peds[j].pos[t], h_prev[j]});
          other_ped.push_back(j);
        }
        const Vislet v{pw.anchor_in[t], pw.pos[t]};
        const auto frustum =
          pooling::Frustum::from_vislet(v, m.hp.gamma_rad(), m.hp.frustum_depth());
        std::vector<std::pair<int, int>> members;
        auto grid = pooling::pool_hidden_states(pw.pos[t], others, frustum, m.hp.grid_cells,
                                                m.hp.cell_size, d, m.frustum_gated(), &members);
        sc.pool_cells = grid.cells();
        sc.pool_members.clear();
        for (const auto & [k, cell] : members) {
          sc.pool_members.emplace_back(other_ped[k], cell);
        }
        sc.pre_h = pool_embed_pre(m.embed_h, d, sc.pool_cells);
        sc.e_h = nn::relu(sc.pre_h);
      } else {
        sc.e_h = VectorXd::Zero(d);
      }

      VectorXd input(3 * d);
      input << sc.e_x, sc.e_a, sc.e_h;
      m.lstm.forward(input, h_prev[i], c_prev[i], sc.h, sc.c, sc.lstm);
      h_next[i] = sc.h;
      c_next[i] = sc.c;

      if (t >= m.hp.t_obs - 1) {
        const VectorXd out = m.head.forward(sc.h);
        Vector4d target;
        target << (to_vec(pw.pos[t + 1]) - to_vec(pw.pos[t])) / s,
          (to_vec(pw.anchor[t + 1]) - to_vec(pw.anchor[t])) / s;
        const HeadLoss hl = head_loss(m, out, target);
        stats.total += hl.nll;
        stats.terms += 1;
        sc.has_loss = true;
        sc.d_out = hl.d_out;
        mu_pred[i] = head_mu(m.variant, out);
      }
    }
    h_prev.swap(h_next);
    c_prev.swap(c_next);
  }
  return stats;
}

LossStats sequence_loss(const MxLstmModel & m, const data::SceneWindow & window,
                        const SsPlan * ss)
{
  return forward_window(m, window, nullptr, ss);
}

LossStats sequence_loss_grad(const MxLstmModel & m, const data::SceneWindow & window,
                             Gradients & grads, const SsPlan * ss)
{
  std::vector<std::vector<StepPedCache>> cache;
  const LossStats stats = forward_window(m, window, &cache, ss);

  const int d = m.hp.hidden;
  const int p_count = static_cast<int>(window.peds.size());
  const int steps = static_cast<int>(cache.size());

  std::vector<VectorXd> d_h(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> d_c(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> d_h_prev(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> d_c_prev(p_count, VectorXd::Zero(d));

  for (int t = steps - 1; t >= 0; --t) {
    for (int i = 0; i < p_count; ++i) {
      d_h_prev[i].setZero();
      d_c_prev[i].setZero();
    }
    for (int i = 0; i < p_count; ++i) {
      StepPedCache & sc = cache[t][i];
      if (sc.has_loss) {
        d_h[i] += m.head.backward(sc.d_out, sc.h, grads.head_w, grads.head_b);
      }

      VectorXd d_input, d_hp, d_cp;
      m.lstm.backward(sc.lstm, d_h[i], d_c[i], grads.lstm_w, grads.lstm_b, d_input, d_hp, d_cp);
      d_h_prev[i] += d_hp;
      d_c_prev[i] += d_cp;

      m.embed_x.backward(d_input.segment(0, d), sc.pre_x, sc.nx, grads.embed_x_w,
                         grads.embed_x_b);
      if (m.uses_vislets()) {
        m.embed_a.backward(d_input.segment(d, d), sc.pre_a, sc.na, grads.embed_a_w,
                           grads.embed_a_b);
      }
      if (m.uses_pooling()) {
        VectorXd d_pre = d_input.segment(2 * d, d);
        for (Eigen::Index k = 0; k < d_pre.size(); ++k) {
          if (sc.pre_h[k] <= 0.0) {
            d_pre[k] = 0.0;
          }
        }
        grads.embed_h_b += d_pre;
        std::map<int, VectorXd> d_cell;
        for (const auto & [cell, hsum] : sc.pool_cells) {
          grads.embed_h_w.middleCols(static_cast<Eigen::Index>(cell) * d, d).noalias() +=
            d_pre * hsum.transpose();
          d_cell[cell] =
            m.embed_h.weight.middleCols(static_cast<Eigen::Index>(cell) * d, d).transpose() *
            d_pre;
        }
        for (const auto & [j, cell] : sc.pool_members) {
          if (t > 0) {
            d_h_prev[j] += d_cell[cell];
          }
        }
      }
    }
    d_h.swap(d_h_prev);
    d_c.swap(d_c_prev);
  }
  return stats;
}

namespace {

// World-unit Gaussian parameters for reporting: mu scaled by s, the factor
// scaled by s (log-diagonal shifted, off-diagonals multiplied).
void to_world(const Vector4d & mu, const Eigen::Matrix<double, 10, 1> & theta, double s,
              StepPrediction & sp)
{
  sp.mu_world = s * mu;
  sp.theta_world = theta;
  const double log_s = std::log(s);
  for (int dim = 0, slot = 0; dim < 4; ++dim) {
    for (int j = dim; j < 4; ++j, ++slot) {
      if (j == dim) {
        sp.theta_world[slot] += log_s;
      } else {
        sp.theta_world[slot] *= s;
      }
    }
  }
}

// Packed block-diagonal theta from the two bivariate blocks: the upper factor
// of each 2x2 covariance lands in slots (0,1,4) and (7,8,9).
Eigen::Matrix<double, 10, 1> bd_theta(const VectorXd & out)
{
  Eigen::Matrix<double, 10, 1> theta = Eigen::Matrix<double, 10, 1>::Zero();
  for (int block = 0; block < 2; ++block) {
    const double s1 = std::exp(out[5 * block + 2]);
    const double s2 = std::exp(out[5 * block + 3]);
    const double rho = std::tanh(out[5 * block + 4]);
    // R = [[s1, rho s2], [0, s2 sqrt(1-rho^2)]] gives R^T R = Sigma.
    const double b = rho * s2;
    const double c = s2 * std::sqrt(std::max(1e-300, 1.0 - rho * rho));
    if (block == 0) {
      theta[0] = std::log(s1);
      theta[1] = b;
      theta[4] = std::log(c);
    } else {
      theta[7] = std::log(s1);
      theta[8] = b;
      theta[9] = std::log(c);
    }
  }
  return theta;
}

}  // namespace

ForecastResult forecast(const MxLstmModel & m, const data::SceneWindow & window,
                        const ForecastOptions & opt)
{
  const int d = m.hp.hidden;
  const int t_total = m.hp.t_pred;
  const int t_obs = m.hp.t_obs;
  const int p_count = static_cast<int>(window.peds.size());
  const double s = m.input_scale;
  const double r = m.hp.vislet_radius;

  for (const auto & pw : window.peds) {
    const int need = opt.gt_neighbors ? t_total : t_obs;
    if (static_cast<int>(pw.pos.size()) < need) {
      throw std::invalid_argument("forecast: observation shorter than required");
    }
  }

  Rng rng(opt.sample_seed);

  // Current (frame t) and previous (frame t-1) state per pedestrian.
  std::vector<Position> pos_t(p_count), pos_prev(p_count);
  std::vector<Position> anc_t(p_count), anc_prev(p_count);
  std::vector<double> angle_t(p_count, 0.0);

  auto observed_anchor = [&](int i, int t) -> Position {
    const auto & pw = window.peds[i];
    if (opt.vislet_override_rad.has_value()) {
      return vislet_from_angle(pw.pos[t], HeadAngle(*opt.vislet_override_rad), r).anchor;
    }
    return pw.anchor_in[t];
  };

  for (int i = 0; i < p_count; ++i) {
    pos_t[i] = pos_prev[i] = window.peds[i].pos[0];
    anc_t[i] = anc_prev[i] = observed_anchor(i, 0);
    angle_t[i] = angle_from_vislet(Vislet{anc_t[i], pos_t[i]}).alpha;
  }

  ForecastResult result;
  result.sampled = opt.sampled;
  result.peds.resize(p_count);
  for (int i = 0; i < p_count; ++i) {
    result.peds[i].ped_id = window.peds[i].ped_id;
    result.peds[i].first_pred_frame = window.start_frame + t_obs;
  }

  std::vector<VectorXd> h_prev(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> c_prev(p_count, VectorXd::Zero(d));
  std::vector<VectorXd> h_next(p_count), c_next(p_count);

  for (int t = 0; t + 1 < t_total; ++t) {
    for (int i = 0; i < p_count; ++i) {
      Eigen::Vector2d nx = (to_vec(pos_t[i]) - to_vec(pos_prev[i])) / s;
      Eigen::Vector2d na = m.uses_vislets() ? ((to_vec(anc_t[i]) - to_vec(anc_prev[i])) / s).eval()
                                            : Eigen::Vector2d::Zero();
      if (t == 0) {
        nx.setZero();
        na.setZero();
      }
      const VectorXd e_x = m.embed_x.forward(nx);
      const VectorXd e_a = m.uses_vislets() ? m.embed_a.forward(na) : VectorXd::Zero(d);
      VectorXd e_h = VectorXd::Zero(d);
      if (m.uses_pooling()) {
        std::vector<pooling::Neighbor> others;
        others.reserve(p_count - 1);
        for (int j = 0; j < p_count; ++j) {
          if (j == i) {
            continue;
          }
          const Position pj = opt.gt_neighbors ? window.peds[j].pos[t] : pos_t[j];
          others.push_back({pj, h_prev[j]});
        }
        const Vislet v{anc_t[i], pos_t[i]};
        const auto frustum =
          pooling::Frustum::from_vislet(v, m.hp.gamma_rad(), m.hp.frustum_depth());
        auto grid = pooling::pool_hidden_states(pos_t[i], others, frustum, m.hp.grid_cells,
                                                m.hp.cell_size, d, m.frustum_gated());
        e_h = nn::relu(pool_embed_pre(m.embed_h, d, grid.cells()));
      }
      VectorXd input(3 * d);
      input << e_x, e_a, e_h;
      nn::LstmCell::StepCache cache;
      VectorXd h, c;
      m.lstm.forward(input, h_prev[i], c_prev[i], h, c, cache);
      h_next[i] = h;
      c_next[i] = c;
    }
    h_prev.swap(h_next);
    c_prev.swap(c_next);

    // Advance per-pedestrian state to frame t+1.
    pos_prev = pos_t;
    anc_prev = anc_t;
    if (t + 1 < t_obs) {
      for (int i = 0; i < p_count; ++i) {
        pos_t[i] = window.peds[i].pos[t + 1];
        anc_t[i] = observed_anchor(i, t + 1);
        angle_t[i] = angle_from_vislet(Vislet{anc_t[i], pos_t[i]}).alpha;
      }
      continue;
    }

    for (int i = 0; i < p_count; ++i) {
      const VectorXd out = m.head.forward(h_prev[i]);
      if (!out.allFinite()) {
        throw std::runtime_error("forecast: non-finite head output");
      }

      Vector4d offsets;  // normalized units
      Eigen::Matrix<double, 10, 1> theta_norm;
      switch (m.variant) {
        case Variant::kBd: {
          theta_norm = bd_theta(out);
          if (opt.sampled) {
            for (int block = 0; block < 2; ++block) {
              gaussian::BivariateParams p;
              p.mu1 = out[5 * block + 0];
              p.mu2 = out[5 * block + 1];
              p.log_sigma1 = out[5 * block + 2];
              p.log_sigma2 = out[5 * block + 3];
              p.rho_raw = out[5 * block + 4];
              offsets.segment(2 * block, 2) = gaussian::bivariate_sample(p, rng);
            }
          } else {
            offsets = head_mu(m.variant, out);
          }
          break;
        }
        default: {
          theta_norm = out.tail(10);
          if (opt.sampled) {
            if (m.variant == Variant::kVanilla) {
              // Only the position marginal is trained; sample it.
              Eigen::Vector2d mu2(out[0], out[1]);
              Eigen::Vector3d th2(out[4 + kMarginalSlots[0]], out[4 + kMarginalSlots[1]],
                                  out[4 + kMarginalSlots[2]]);
              const VectorXd xy = gaussian::sample(mu2, th2, rng);
              offsets << xy[0], xy[1], 0.0, 0.0;
            } else {
              offsets = gaussian::sample(VectorXd(out.head(4)), VectorXd(theta_norm), rng);
            }
          } else {
            offsets = head_mu(m.variant, out);
          }
          break;
        }
      }

      // Every emitted covariance must reconstruct positive definite.
      {
        gaussian::LogCholParams check;
        check.mu = head_mu(m.variant, out);
        check.theta = theta_norm;
        const auto g4 = gaussian::reconstruct(check);
        if (!g4.sigma.allFinite()) {
          throw std::runtime_error("forecast: non-finite covariance during rollout");
        }
      }

      const Position new_pos{pos_prev[i].x + offsets[0] * s, pos_prev[i].y + offsets[1] * s};
      Position new_anchor;
      if (m.variant == Variant::kVanilla) {
        new_anchor = vislet_from_angle(new_pos, HeadAngle(angle_t[i]), r).anchor;
      } else {
        const Position raw{anc_prev[i].x + offsets[2] * s, anc_prev[i].y + offsets[3] * s};
        if (distance(raw, new_pos) < 1e-12) {
          new_anchor = vislet_from_angle(new_pos, HeadAngle(angle_t[i]), r).anchor;
        } else {
          new_anchor = normalize_vislet(new_pos, raw, r).anchor;
        }
      }
      pos_t[i] = new_pos;
      anc_t[i] = new_anchor;
      angle_t[i] = angle_from_vislet(Vislet{new_anchor, new_pos}).alpha;

      StepPrediction sp;
      sp.position = new_pos;
      sp.anchor = new_anchor;
      sp.head_angle_rad = angle_t[i];
      to_world(head_mu(m.variant, out), theta_norm, s, sp);
      result.peds[i].steps.push_back(sp);
    }
  }
  return result;
}

ForecastResult counterfactual_forecast(const MxLstmModel & m, const data::SceneWindow & window,
                                       double override_angle_rad, const ForecastOptions & opt)
{
  ForecastOptions o = opt;
  o.vislet_override_rad = override_angle_rad;
  return forecast(m, window, o);
}

}  // namespace mxcast::model
