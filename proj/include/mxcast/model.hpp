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

#ifndef MXCAST__MODEL_HPP_
#define MXCAST__MODEL_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mxcast/data.hpp"
#include "mxcast/gaussian.hpp"
#include "mxcast/geometry.hpp"
#include "mxcast/nn.hpp"
#include "mxcast/pooling.hpp"

namespace mxcast::model {

enum class Variant { kFull, kBd, kNoFrustum, kIndividual, kVanilla };

Variant variant_from_string(const std::string & name);
std::string variant_to_string(Variant v);

struct Hyperparams {
  int hidden{128};        // D
  int grid_cells{32};     // N_o
  double cell_size{0.2};  // meters per pooling cell
  double gamma_deg{40.0};
  double vislet_radius{0.5};
  int t_obs{8};
  int t_pred{20};
  double frame_period{0.4};
  std::uint64_t seed{12345};

  double gamma_rad() const;
  double frustum_depth() const { return 0.5 * grid_cells * cell_size; }
  int pred_steps() const { return t_pred - t_obs; }
};

/// The mixing LSTM: position and vislet embeddings, optional social pooling,
/// one LSTM cell, and a Gaussian-parameter head. Variants drop streams:
/// vanilla keeps only positions, individual drops pooling, no_frustum pools
/// without the view-frustum gate, bd replaces the 4x4 head by two 2x2 blocks.
struct MxLstmModel {
  Variant variant{Variant::kFull};
  Hyperparams hp;
  double input_scale{1.0};

  nn::EmbeddingLayer embed_x;  // D x 2
  nn::EmbeddingLayer embed_a;  // D x 2, absent for vanilla
  nn::EmbeddingLayer embed_h;  // D x (N_o^2 D), pooling variants only
  nn::LstmCell lstm;           // input width 3D (missing streams feed zeros)
  nn::OutputLayer head;        // 14 x D, or 10 x D for bd

  bool uses_vislets() const { return variant != Variant::kVanilla; }
  bool uses_pooling() const
  {
    return variant == Variant::kFull || variant == Variant::kBd ||
           variant == Variant::kNoFrustum;
  }
  bool frustum_gated() const { return variant != Variant::kNoFrustum; }
  int head_dim() const { return variant == Variant::kBd ? 10 : 14; }
  int lstm_input_dim() const { return 3 * hp.hidden; }

  static MxLstmModel create(Variant variant, const Hyperparams & hp);
};

/// Per-parameter-block gradient buffers, shaped like the model.
struct Gradients {
  Eigen::MatrixXd embed_x_w;
  Eigen::VectorXd embed_x_b;
  Eigen::MatrixXd embed_a_w;
  Eigen::VectorXd embed_a_b;
  Eigen::MatrixXd embed_h_w;
  Eigen::VectorXd embed_h_b;
  Eigen::MatrixXd lstm_w;
  Eigen::VectorXd lstm_b;
  Eigen::MatrixXd head_w;
  Eigen::VectorXd head_b;

  static Gradients zeros_like(const MxLstmModel & m);
  void set_zero();
  void add(const Gradients & o);
  void scale(double s);
  double squared_norm() const;
};

/// Named views over a model's parameter blocks, in serialization order.
struct ParamBlock {
  std::string name;
  Eigen::MatrixXd * mat{nullptr};
  Eigen::VectorXd * vec{nullptr};
};
std::vector<ParamBlock> param_blocks(MxLstmModel & m);
std::vector<ParamBlock> grad_blocks(Gradients & g, const MxLstmModel & m);

struct LossStats {
  double total{0.0};
  int terms{0};
};

/// Scheduled-sampling plan: feed_back[t][ped] true means the step-t input is
/// the model's own previous mean (detached) instead of ground truth.
using SsPlan = std::vector<std::vector<char>>;

/// Summed prediction-window NLL of one scene window under teacher forcing.
LossStats sequence_loss(const MxLstmModel & m, const data::SceneWindow & window,
                        const SsPlan * ss = nullptr);

/// Same forward pass plus exact reverse-mode gradients (through the Gaussian
/// head, the LSTM recursion, and cross-pedestrian pooling), accumulated into
/// `grads`.
LossStats sequence_loss_grad(const MxLstmModel & m, const data::SceneWindow & window,
                             Gradients & grads, const SsPlan * ss = nullptr);

struct StepPrediction {
  Position position;
  Position anchor;  // renormalized to the vislet radius
  double head_angle_rad{0.0};
  // Predicted next-offset Gaussian in world units (meters):
  // 4 means + packed upper-Cholesky theta.
  Eigen::Vector4d mu_world{Eigen::Vector4d::Zero()};
  Eigen::Matrix<double, 10, 1> theta_world{Eigen::Matrix<double, 10, 1>::Zero()};
};

struct PedForecast {
  std::int64_t ped_id{0};
  std::int64_t first_pred_frame{0};
  std::vector<StepPrediction> steps;  // t_pred - t_obs entries
};

struct ForecastResult {
  std::vector<PedForecast> peds;
  bool sampled{false};
};

struct ForecastOptions {
  bool sampled{false};
  std::uint64_t sample_seed{0};
  bool gt_neighbors{false};  // pool ground-truth neighbor futures instead of predictions
  std::optional<double> vislet_override_rad;
};

/// Autoregressive rollout: the first t_obs frames of each pedestrian are
/// consumed as ground truth, then the model feeds back its own predictions
/// (mean or sampled) for t_pred - t_obs steps. Pedestrians advance in
/// lockstep; pooling reads the previous step's hidden states.
ForecastResult forecast(const MxLstmModel & m, const data::SceneWindow & window,
                        const ForecastOptions & opt = {});

/// forecast() with every observation vislet replaced by the override angle.
ForecastResult counterfactual_forecast(const MxLstmModel & m, const data::SceneWindow & window,
                                       double override_angle_rad,
                                       const ForecastOptions & opt = {});

struct TrainConfig {
  int epochs{100};
  int start_epoch{0};  // nonzero when resuming, keeps the epoch seed stream aligned
  int batch{8};
  nn::AdamOptimizer::Config opt{};
  double clip_norm{10.0};
  int threads{1};
  double scheduled_sampling{0.0};   // probability of feeding back the mean
  double noise_aug_sigma_deg{0.0};  // head-noise augmentation on inputs
  bool shuffle{true};
  bool compute_scale{true};  // derive input_scale from the data before epoch 0
};

struct TrainResult {
  std::vector<double> epoch_mean_nll;
  long steps{0};
  bool diverged{false};
  std::string note;
};

/// Minimizes the prediction-window NLL over all windows. Deterministic for a
/// fixed seed and thread count. `on_epoch` (when set) runs after each epoch,
/// e.g. to checkpoint.
TrainResult train(MxLstmModel & m, const std::vector<data::SceneWindow> & windows,
                  const TrainConfig & cfg, nn::AdamOptimizer & opt,
                  const std::function<void(int, double)> & on_epoch = nullptr);

/// Derives the offset-normalization constant (std of all offset components).
double compute_input_scale(const std::vector<data::SceneWindow> & windows);

// Versioned binary checkpoint: all weights, hyperparameters, variant, seed,
// and (optionally) optimizer state. Layout documented in the README.
void save_checkpoint(const std::string & path, const MxLstmModel & m,
                     const nn::AdamOptimizer * opt = nullptr, int epochs_done = 0);

struct Checkpoint {
  MxLstmModel model;
  nn::AdamOptimizer optimizer;
  bool has_optimizer{false};
  int epochs_done{0};
};

Checkpoint load_checkpoint(const std::string & path);

}  // namespace mxcast::model

#endif  // MXCAST__MODEL_HPP_
