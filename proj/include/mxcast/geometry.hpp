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

#ifndef MXCAST__GEOMETRY_HPP_
#define MXCAST__GEOMETRY_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mxcast {

/// Ground-plane position in meters.
struct Position {
  double x{0.0};
  double y{0.0};

  Position operator+(const Position & o) const { return {x + o.x, y + o.y}; }
  Position operator-(const Position & o) const { return {x - o.x, y - o.y}; }
  bool operator==(const Position & o) const = default;
};

double distance(const Position & a, const Position & b);

/// Wraps any real angle into [-pi, pi).
double wrap_angle(double radians);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

/// Head pan angle in radians, measured from the world +x axis, in [-pi, pi).
struct HeadAngle {
  double alpha{0.0};

  explicit HeadAngle(double radians) : alpha(wrap_angle(radians)) {}
  HeadAngle() = default;
};

/// Anchor point at a fixed radius from its origin position, encoding head
/// orientation without an angular discontinuity.
struct Vislet {
  Position anchor;
  Position origin;

  double radius() const { return distance(anchor, origin); }
};

/// Builds the vislet anchor at origin + r*(cos a, sin a).
Vislet vislet_from_angle(const Position & origin, HeadAngle alpha, double r);

/// Recovers the pan angle from a vislet; throws if anchor coincides with origin.
HeadAngle angle_from_vislet(const Vislet & v);

/// Angle of the displacement p_t -> p_t1; throws on zero displacement.
HeadAngle movement_angle(const Position & p_t, const Position & p_t1);

/// Re-normalizes an anchor onto the radius-r circle around origin, keeping its
/// direction. Falls back to +x when anchor and origin coincide.
Vislet normalize_vislet(const Position & origin, const Position & anchor, double r);

struct TrackSample {
  std::int64_t frame{0};
  Position position;
  Vislet vislet;
};

/// One pedestrian's time-indexed samples. Frame indices must be strictly
/// increasing; consecutive indices (delta 1) form a contiguous run, larger
/// deltas are gaps that split the track into separate observation windows.
struct PedestrianTrack {
  std::int64_t ped_id{0};
  std::vector<TrackSample> samples;

  void validate() const;
};

struct Scene {
  std::vector<PedestrianTrack> tracks;
  double frame_period{0.4};  // seconds per sample
  bool has_heads{true};

  void validate() const;
};

class degenerate_vislet_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class undefined_motion_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mxcast

#endif  // MXCAST__GEOMETRY_HPP_
