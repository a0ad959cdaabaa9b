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

#ifndef MXCAST__POOLING_HPP_
#define MXCAST__POOLING_HPP_

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "mxcast/geometry.hpp"

namespace mxcast::pooling {

/// View frustum of attention: a depth-bounded cone ahead of the pedestrian.
struct Frustum {
  Position apex;
  Eigen::Vector2d direction;  // unit vector
  double aperture{0.0};       // full angle gamma, radians
  double depth{0.0};          // meters

  static Frustum from_vislet(const Vislet & v, double gamma, double depth);
};

/// True iff `other` lies within the frustum: angular offset from the axis at
/// most gamma/2 and distance at most depth. Boundary points count as inside;
/// the apex itself does not.
bool in_vfoa(const Frustum & f, const Position & other);

/// Person-centered, world-axis-aligned square grid of cells_per_side x
/// cells_per_side cells. Pooled hidden states are kept sparsely, one slot per
/// populated cell, in ascending flat-index order.
class PoolingGrid {
 public:
  PoolingGrid(int cells_per_side, double cell_size, int state_dim)
  : n_(cells_per_side), cell_(cell_size), dim_(state_dim) {}

  int cells_per_side() const { return n_; }
  double cell_size() const { return cell_; }
  int state_dim() const { return dim_; }
  double half_extent() const { return 0.5 * n_ * cell_; }

  /// Flat cell index of `other` relative to `center`, or -1 when it falls
  /// outside the grid. Flat index = m * cells_per_side + n with m along x.
  int cell_index(const Position & center, const Position & other) const;

  void add(int flat_index, const Eigen::VectorXd & h);

  /// Populated cells in ascending flat-index order.
  const std::vector<std::pair<int, Eigen::VectorXd>> & cells() const { return cells_; }

  bool empty() const { return cells_.empty(); }

  /// Dense N*N*D flattening (cell-major); used by tests and oracles.
  Eigen::VectorXd dense() const;

 private:
  int n_;
  double cell_;
  int dim_;
  std::vector<std::pair<int, Eigen::VectorXd>> cells_;
};

struct Neighbor {
  Position position;
  Eigen::VectorXd hidden;
};

/// Sums each frustum member's hidden state into the grid cell containing its
/// position around `ego`. With `use_frustum` false (the NoFrustum variant)
/// membership is grid extent alone. Neighbors are accumulated in input order.
/// When `members` is given it receives (index into others, flat cell) for
/// every contributing neighbor, in input order.
PoolingGrid pool_hidden_states(const Position & ego, const std::vector<Neighbor> & others,
                               const Frustum & f, int cells_per_side, double cell_size,
                               int state_dim, bool use_frustum = true,
                               std::vector<std::pair<int, int>> * members = nullptr);

}  // namespace mxcast::pooling

#endif  // MXCAST__POOLING_HPP_
