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

#include "mxcast/pooling.hpp"

#include <algorithm>
#include <cmath>

namespace mxcast::pooling {

Frustum Frustum::from_vislet(const Vislet & v, double gamma, double depth)
{
  Frustum f;
  f.apex = v.origin;
  Eigen::Vector2d dir(v.anchor.x - v.origin.x, v.anchor.y - v.origin.y);
  const double n = dir.norm();
  f.direction = (n > 0.0) ? Eigen::Vector2d(dir / n) : Eigen::Vector2d(1.0, 0.0);
  f.aperture = gamma;
  f.depth = depth;
  return f;
}

bool in_vfoa(const Frustum & f, const Position & other)
{
  const double ux = other.x - f.apex.x;
  const double uy = other.y - f.apex.y;
  if (ux == 0.0 && uy == 0.0) {
    return false;
  }
  if (ux * ux + uy * uy > f.depth * f.depth) {
    return false;
  }
  const double dot = f.direction.x() * ux + f.direction.y() * uy;
  const double cross = f.direction.x() * uy - f.direction.y() * ux;
  const double angle = std::atan2(std::abs(cross), dot);
  return angle <= 0.5 * f.aperture;
}

int PoolingGrid::cell_index(const Position & center, const Position & other) const
{
  const double half = half_extent();
  const int m = static_cast<int>(std::floor((other.x - center.x + half) / cell_));
  const int n = static_cast<int>(std::floor((other.y - center.y + half) / cell_));
  if (m < 0 || m >= n_ || n < 0 || n >= n_) {
    return -1;
  }
  return m * n_ + n;
}

void PoolingGrid::add(int flat_index, const Eigen::VectorXd & h)
{
  auto it = std::lower_bound(
    cells_.begin(), cells_.end(), flat_index,
    [](const auto & entry, int idx) { return entry.first < idx; });
  if (it != cells_.end() && it->first == flat_index) {
    it->second += h;
  } else {
    cells_.insert(it, {flat_index, h});
  }
}

Eigen::VectorXd PoolingGrid::dense() const
{
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_) * n_ * dim_);
  for (const auto & [idx, h] : cells_) {
    out.segment(static_cast<Eigen::Index>(idx) * dim_, dim_) = h;
  }
  return out;
}

PoolingGrid pool_hidden_states(const Position & ego, const std::vector<Neighbor> & others,
                               const Frustum & f, int cells_per_side, double cell_size,
                               int state_dim, bool use_frustum,
                               std::vector<std::pair<int, int>> * members)
{
  PoolingGrid grid(cells_per_side, cell_size, state_dim);
  for (std::size_t k = 0; k < others.size(); ++k) {
    const auto & other = others[k];
    if (use_frustum && !in_vfoa(f, other.position)) {
      continue;
    }
    if (!use_frustum && other.position == ego) {
      continue;
    }
    const int idx = grid.cell_index(ego, other.position);
    if (idx >= 0) {
      grid.add(idx, other.hidden);
      if (members != nullptr) {
        members->emplace_back(static_cast<int>(k), idx);
      }
    }
  }
  return grid;
}

}  // namespace mxcast::pooling
