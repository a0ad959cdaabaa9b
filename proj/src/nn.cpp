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

#include "mxcast/nn.hpp"

#include <cmath>

namespace mxcast::nn {

VectorXd relu(const VectorXd & x) { return x.cwiseMax(0.0); }

VectorXd sigmoid(const VectorXd & x)
{
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void init_uniform(Eigen::Ref<MatrixXd> w, Rng & rng)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      w(i, j) = rng.uniform(-bound, bound);
    }
  }
}

void EmbeddingLayer::init(Rng & rng)
{
  init_uniform(weight, rng);
  bias.setZero();
}

VectorXd EmbeddingLayer::forward(const VectorXd & input) const
{
  VectorXd pre;
  return forward(input, pre);
}

VectorXd EmbeddingLayer::forward(const VectorXd & input, VectorXd & pre) const
{
  if (input.size() != weight.cols()) {
    throw dimension_error("EmbeddingLayer: input width mismatch");
  }
  pre = weight * input + bias;
  return relu(pre);
}

VectorXd EmbeddingLayer::backward(const VectorXd & d_out, const VectorXd & pre,
                                  const VectorXd & input, MatrixXd & d_weight,
                                  VectorXd & d_bias) const
{
  VectorXd d_pre = d_out;
  for (Eigen::Index k = 0; k < d_pre.size(); ++k) {
    if (pre[k] <= 0.0) {
      d_pre[k] = 0.0;
    }
  }
  d_weight.noalias() += d_pre * input.transpose();
  d_bias += d_pre;
  return weight.transpose() * d_pre;
}

LstmCell::LstmCell(int hidden_dim, int in_dim)
: weight(MatrixXd::Zero(4 * hidden_dim, in_dim + hidden_dim)),
  bias(VectorXd::Zero(4 * hidden_dim)),
  hidden(hidden_dim),
  input_dim(in_dim)
{
}

void LstmCell::init(Rng & rng)
{
  init_uniform(weight, rng);
  bias.setZero();
  // Forget gate bias starts at 1 so early training does not erase the cell.
  bias.segment(hidden, hidden).setConstant(1.0);
}

void LstmCell::forward(const VectorXd & input, const VectorXd & h_prev, const VectorXd & c_prev,
                       VectorXd & h, VectorXd & c, StepCache & cache) const
{
  if (input.size() != input_dim || h_prev.size() != hidden || c_prev.size() != hidden) {
    throw dimension_error("LstmCell: shape mismatch");
  }
  VectorXd xh(input_dim + hidden);
  xh << input, h_prev;
  VectorXd gates = weight * xh + bias;

  cache.input = input;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.gate_i = sigmoid(gates.segment(0, hidden));
  cache.gate_f = sigmoid(gates.segment(hidden, hidden));
  cache.gate_o = sigmoid(gates.segment(2 * hidden, hidden));
  cache.gate_g = gates.segment(3 * hidden, hidden).array().tanh();

  c = cache.gate_f.cwiseProduct(c_prev) + cache.gate_i.cwiseProduct(cache.gate_g);
  cache.c = c;
  cache.tanh_c = c.array().tanh();
  h = cache.gate_o.cwiseProduct(cache.tanh_c);
}

void LstmCell::backward(const StepCache & cache, const VectorXd & d_h, const VectorXd & d_c,
                        MatrixXd & d_weight, VectorXd & d_bias, VectorXd & d_input,
                        VectorXd & d_h_prev, VectorXd & d_c_prev) const
{
  const VectorXd d_o = d_h.cwiseProduct(cache.tanh_c);
  const VectorXd one_minus_tc2 =
    (1.0 - cache.tanh_c.array().square()).matrix();
  const VectorXd d_c_total = d_c + d_h.cwiseProduct(cache.gate_o).cwiseProduct(one_minus_tc2);

  const VectorXd d_i = d_c_total.cwiseProduct(cache.gate_g);
  const VectorXd d_f = d_c_total.cwiseProduct(cache.c_prev);
  const VectorXd d_g = d_c_total.cwiseProduct(cache.gate_i);
  d_c_prev = d_c_total.cwiseProduct(cache.gate_f);

  VectorXd d_gates(4 * hidden);
  d_gates.segment(0, hidden) =
    d_i.cwiseProduct(cache.gate_i).cwiseProduct((1.0 - cache.gate_i.array()).matrix());
  d_gates.segment(hidden, hidden) =
    d_f.cwiseProduct(cache.gate_f).cwiseProduct((1.0 - cache.gate_f.array()).matrix());
  d_gates.segment(2 * hidden, hidden) =
    d_o.cwiseProduct(cache.gate_o).cwiseProduct((1.0 - cache.gate_o.array()).matrix());
  d_gates.segment(3 * hidden, hidden) =
    d_g.cwiseProduct((1.0 - cache.gate_g.array().square()).matrix());

  VectorXd xh(input_dim + hidden);
  xh << cache.input, cache.h_prev;
  d_weight.noalias() += d_gates * xh.transpose();
  d_bias += d_gates;

  const VectorXd d_xh = weight.transpose() * d_gates;
  d_input = d_xh.head(input_dim);
  d_h_prev = d_xh.tail(hidden);
}

void OutputLayer::init(Rng & rng)
{
  init_uniform(weight, rng);
  bias.setZero();
}

VectorXd OutputLayer::forward(const VectorXd & input) const
{
  if (input.size() != weight.cols()) {
    throw dimension_error("OutputLayer: input width mismatch");
  }
  return weight * input + bias;
}

VectorXd OutputLayer::backward(const VectorXd & d_out, const VectorXd & input,
                               MatrixXd & d_weight, VectorXd & d_bias) const
{
  d_weight.noalias() += d_out * input.transpose();
  d_bias += d_out;
  return weight.transpose() * d_out;
}

int AdamOptimizer::add_block(Eigen::Index rows, Eigen::Index cols)
{
  m_.emplace_back(MatrixXd::Zero(rows, cols));
  v_.emplace_back(MatrixXd::Zero(rows, cols));
  return static_cast<int>(m_.size()) - 1;
}

void AdamOptimizer::update_block(int handle, Eigen::Ref<MatrixXd> param, const MatrixXd & grad)
{
  if (!grad.allFinite()) {
    throw training_divergence_error("AdamOptimizer: non-finite gradient in block " +
                                    std::to_string(handle));
  }
  if (current_lr_less_decay_ < 0.0) {
    current_lr_less_decay_ = cfg_.lr;
  }
  MatrixXd & m = m_.at(handle);
  MatrixXd & v = v_.at(handle);
  const long t = step_ + 1;
  m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
  v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
  const MatrixXd m_hat = m / bc1;
  const MatrixXd denom = ((v / bc2).array().sqrt() + cfg_.eps).matrix();
  param -= current_lr_less_decay_ * (m_hat.cwiseQuotient(denom) + cfg_.l2 * param);
}

void AdamOptimizer::advance()
{
  if (current_lr_less_decay_ < 0.0) {
    current_lr_less_decay_ = cfg_.lr;
  }
  ++step_;
  current_lr_less_decay_ *= cfg_.lr_decay;
}

void AdamOptimizer::restore(long step, double lr_now)
{
  step_ = step;
  current_lr_less_decay_ = lr_now;
}

}  // namespace mxcast::nn
