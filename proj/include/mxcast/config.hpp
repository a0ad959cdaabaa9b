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

#ifndef MXCAST__CONFIG_HPP_
#define MXCAST__CONFIG_HPP_

#include <cstdint>
#include <set>
#include <string>

namespace mxcast::config {

/// Every tunable in one place. Values mirror the CLI flags one-to-one and
/// round-trip through the line-oriented key=value config format.
struct RunConfig {
  // model
  std::string variant{"full"};
  int hidden{128};
  int grid_cells{32};
  double cell_size{0.2};
  double gamma_deg{40.0};
  double vislet_radius{0.5};
  int t_obs{8};
  int t_pred{20};
  // training
  double lr{3e-3};
  double l2{5e-4};
  double lr_decay{1.0};
  double clip_norm{10.0};
  int epochs{100};
  int batch{8};
  double scheduled_sampling{0.0};
  double noise_aug_sigma_deg{0.0};
  // run
  std::uint64_t seed{12345};
  std::string mode{"mean"};
  double noise_sigma_deg{0.0};
  double frame_period{0.4};
  int threads{1};
  int window_stride{0};  // 0 means t_pred (non-overlapping windows)
  bool gt_neighbors{false};
  // analysis
  double min_speed{0.45};
  double bin_half_width{0.01};
  int bins{50};
  // synthesis
  std::string scenario{"linear"};
  int episodes{50};
  int members{1};
  int episode_frames{20};
  int head_lead{3};
  double speed{1.2};
  double pos_noise{0.0};
  double head_noise_deg{0.0};
  double gaze_bias_speed{0.10};
  double jitter_speed{0.08};

  bool operator==(const RunConfig &) const = default;
};

/// Writes every field as `key=value`, one per line, stable order.
std::string to_text(const RunConfig & cfg);
void save_config(const std::string & path, const RunConfig & cfg);

/// Reads `key=value` lines ('#' comments allowed). Unknown keys throw.
/// `seen` (when given) collects the keys present in the file.
RunConfig load_config(const std::string & path, std::set<std::string> * seen = nullptr);
RunConfig parse_config_text(const std::string & text, std::set<std::string> * seen = nullptr);

}  // namespace mxcast::config

#endif  // MXCAST__CONFIG_HPP_
