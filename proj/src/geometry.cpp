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

#include "mxcast/geometry.hpp"

#include <cmath>
#include <set>
#include <string>

namespace mxcast {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

double distance(const Position & a, const Position & b)
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

double wrap_angle(double radians)
{
  double y = std::fmod(radians + M_PI, kTwoPi);
  if (y < 0.0) {
    y += kTwoPi;
  }
  return y - M_PI;
}

double deg_to_rad(double deg) { return deg * M_PI / 180.0; }

double rad_to_deg(double rad) { return rad * 180.0 / M_PI; }

Vislet vislet_from_angle(const Position & origin, HeadAngle alpha, double r)
{
  if (!(r > 0.0)) {
    throw std::invalid_argument("vislet_from_angle: radius must be positive");
  }
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(alpha.alpha)) {
    throw std::invalid_argument("vislet_from_angle: non-finite input");
  }
  Position anchor{origin.x + r * std::cos(alpha.alpha), origin.y + r * std::sin(alpha.alpha)};
  return Vislet{anchor, origin};
}

HeadAngle angle_from_vislet(const Vislet & v)
{
  const double dx = v.anchor.x - v.origin.x;
  const double dy = v.anchor.y - v.origin.y;
  if (dx == 0.0 && dy == 0.0) {
    throw degenerate_vislet_error("angle_from_vislet: anchor coincides with origin");
  }
  return HeadAngle(std::atan2(dy, dx));
}

HeadAngle movement_angle(const Position & p_t, const Position & p_t1)
{
  const double dx = p_t1.x - p_t.x;
  const double dy = p_t1.y - p_t.y;
  if (dx == 0.0 && dy == 0.0) {
    throw undefined_motion_error("movement_angle: zero displacement");
  }
  return HeadAngle(std::atan2(dy, dx));
}

Vislet normalize_vislet(const Position & origin, const Position & anchor, double r)
{
  if (!(r > 0.0)) {
    throw std::invalid_argument("normalize_vislet: radius must be positive");
  }
  const double dx = anchor.x - origin.x;
  const double dy = anchor.y - origin.y;
  const double n = std::hypot(dx, dy);
  if (n < 1e-12) {
    return Vislet{{origin.x + r, origin.y}, origin};
  }
  return Vislet{{origin.x + r * dx / n, origin.y + r * dy / n}, origin};
}

void PedestrianTrack::validate() const
{
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (samples[k].frame <= samples[k - 1].frame) {
      throw std::invalid_argument(
        "track " + std::to_string(ped_id) + ": frame indices not strictly increasing");
    }
  }
}

void Scene::validate() const
{
  std::set<std::int64_t> ids;
  for (const auto & t : tracks) {
    t.validate();
    if (!ids.insert(t.ped_id).second) {
      throw std::invalid_argument("scene: duplicate ped_id " + std::to_string(t.ped_id));
    }
  }
}

}  // namespace mxcast
