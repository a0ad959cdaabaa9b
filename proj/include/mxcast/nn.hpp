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

#ifndef MXCAST__NN_HPP_
#define MXCAST__NN_HPP_

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "mxcast/rng.hpp"

namespace mxcast::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class training_divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear projection followed by ReLU.
struct EmbeddingLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;    // out

  EmbeddingLayer() = default;
  EmbeddingLayer(int out_dim, int in_dim) : weight(MatrixXd::Zero(out_dim, in_dim)),
                                            bias(VectorXd::Zero(out_dim)) {}

  void init(Rng & rng);

  VectorXd forward(const VectorXd & input) const;

  /// Forward pass that also returns the pre-activation, needed for backward.
  VectorXd forward(const VectorXd & input, VectorXd & pre) const;

  /// Given d(out) and the saved pre-activation, accumulates weight/bias grads
  /// and returns d(input).
  VectorXd backward(const VectorXd & d_out, const VectorXd & pre, const VectorXd & input,
                    MatrixXd & d_weight, VectorXd & d_bias) const;
};

/// Single LSTM cell with the gate matrix packed as [i; f; o; g] rows.
struct LstmCell {
  MatrixXd weight;  // 4H x (in + H)
  VectorXd bias;    // 4H
  int hidden{0};
  int input_dim{0};

  LstmCell() = default;
  LstmCell(int hidden_dim, int in_dim);

  void init(Rng & rng);

  struct StepCache {
    VectorXd input;
    VectorXd h_prev;
    VectorXd c_prev;
    VectorXd gate_i, gate_f, gate_o, gate_g;
    VectorXd c, tanh_c;
  };

  /// One recursion step; fills cache for backward.
  void forward(const VectorXd & input, const VectorXd & h_prev, const VectorXd & c_prev,
               VectorXd & h, VectorXd & c, StepCache & cache) const;

  /// Backward through one step. d_h/d_c are gradients flowing into this
  /// step's outputs; returns gradients for input, h_prev and c_prev.
  void backward(const StepCache & cache, const VectorXd & d_h, const VectorXd & d_c,
                MatrixXd & d_weight, VectorXd & d_bias, VectorXd & d_input,
                VectorXd & d_h_prev, VectorXd & d_c_prev) const;
};

/// Plain affine readout (the Gaussian-parameter head).
struct OutputLayer {
  MatrixXd weight;  // out x in
  VectorXd bias;

  OutputLayer() = default;
  OutputLayer(int out_dim, int in_dim) : weight(MatrixXd::Zero(out_dim, in_dim)),
                                         bias(VectorXd::Zero(out_dim)) {}

  void init(Rng & rng);

  VectorXd forward(const VectorXd & input) const;

  VectorXd backward(const VectorXd & d_out, const VectorXd & input,
                    MatrixXd & d_weight, VectorXd & d_bias) const;
};

/// Adam with a decoupled l2 penalty and optional per-step learning-rate decay.
class AdamOptimizer {
 public:
  struct Config {
    double lr{3e-3};
    double l2{5e-4};
    double beta1{0.9};
    double beta2{0.999};
    double eps{1e-8};
    double lr_decay{1.0};  // multiplicative, applied after each step
  };

  AdamOptimizer() = default;
  explicit AdamOptimizer(Config cfg) : cfg_(cfg) {}

  /// Registers a parameter block; returns its handle.
  int add_block(Eigen::Index rows, Eigen::Index cols);

  /// Applies one update to `param` from `grad` for block `handle`.
  /// Throws training_divergence_error on non-finite gradients.
  void update_block(int handle, Eigen::Ref<MatrixXd> param, const MatrixXd & grad);

  /// Advances the shared step counter; call once per optimization step,
  /// after all blocks were updated.
  void advance();

  const Config & config() const { return cfg_; }
  long step_count() const { return step_; }
  double current_lr() const { return current_lr_less_decay_; }

  // Serialization access for checkpointing.
  std::vector<MatrixXd> & moments_m() { return m_; }
  std::vector<MatrixXd> & moments_v() { return v_; }
  void restore(long step, double lr_now);

 private:
  Config cfg_{};
  std::vector<MatrixXd> m_;
  std::vector<MatrixXd> v_;
  long step_{0};
  double current_lr_less_decay_{-1.0};
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) fill, the shared init scheme.
void init_uniform(Eigen::Ref<MatrixXd> w, Rng & rng);

VectorXd relu(const VectorXd & x);
VectorXd sigmoid(const VectorXd & x);

}  // namespace mxcast::nn

#endif  // MXCAST__NN_HPP_
