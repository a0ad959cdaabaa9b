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

#ifndef MXCAST__DATA_HPP_
#define MXCAST__DATA_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mxcast/geometry.hpp"

namespace mxcast::data {

class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string & msg, int line)
  : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}

  int line() const { return line_; }

 private:
  int line_{0};
};

// Canonical trajectory text format. Header lines start with '#':
//   # mxcast trajectory v1
//   # frame_period <seconds>
//   # units meters
// Data rows are tab separated, sorted by (frame, ped_id):
//   frame  ped_id  x  y  [head_deg]
// Head angles are stored in degrees in [0, 360); the column may be omitted
// (uniformly) for position-only data. Coordinates are meters.
Scene parse_trajectory_file(const std::string & path, double vislet_radius = 0.5);
Scene parse_trajectory_text(const std::string & text, double vislet_radius = 0.5);

void write_trajectory_file(const std::string & path, const Scene & scene);
std::string write_trajectory_text(const Scene & scene);

struct SyntheticSceneSpec {
  enum class Scenario { kLinear, kTurnWithHeadLead, kGroupConversation, kSlowWander };

  Scenario scenario{Scenario::kLinear};
  int episodes{1};
  int members{1};  // pedestrians per episode (group scenario uses >= 3)
  int episode_frames{20};
  int head_lead{3};        // frames by which head rotation precedes the path turn
  double speed{1.2};       // nominal walking speed, m/s
  double pos_noise{0.0};   // per-step positional noise std, meters
  double head_noise_deg{0.0};
  double frame_period{0.4};
  double vislet_radius{0.5};
  std::uint64_t seed{1};

  // group_conversation tuning
  double gaze_bias_speed{0.10};  // m/s swayed along (or against) the gaze
  double jitter_speed{0.08};     // m/s random jitter
};

SyntheticSceneSpec::Scenario scenario_from_string(const std::string & name);
std::string scenario_to_string(SyntheticSceneSpec::Scenario s);

/// Deterministic scene generation; a pure function of the spec. Episodes are
/// placed at disjoint frame ranges so they never interact.
Scene generate_synthetic(const SyntheticSceneSpec & spec);

/// Replaces every head angle by angle + N(0, sigma_deg^2), rebuilds vislets at
/// the original radius, leaves positions untouched. sigma_deg == 0 returns the
/// scene unchanged.
Scene inject_head_noise(const Scene & scene, double sigma_deg, std::uint64_t seed);

/// One pedestrian's contiguous slice of a fixed-length window.
struct PedWindow {
  std::int64_t ped_id{0};
  std::vector<Position> pos;        // window length
  std::vector<Position> anchor;     // targets (ground truth anchors)
  std::vector<Position> anchor_in;  // inputs; equals `anchor` unless noised
};

/// All pedestrians with complete coverage of [start_frame, start_frame+len).
struct SceneWindow {
  std::int64_t start_frame{0};
  std::vector<PedWindow> peds;
};

/// Extracts fixed-length windows from every contiguous run of every track.
/// Window start frames advance by `stride` from each run's first frame; a
/// window contains every pedestrian covering all of its frames. Pedestrians
/// partially covering a window are counted in *skipped when given.
std::vector<SceneWindow> extract_windows(const Scene & scene, int frames, int stride,
                                         int * skipped = nullptr);

}  // namespace mxcast::data

#endif  // MXCAST__DATA_HPP_
