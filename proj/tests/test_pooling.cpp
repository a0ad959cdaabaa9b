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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "mxcast/pooling.hpp"
#include "mxcast/rng.hpp"

using namespace mxcast;
using pooling::Frustum;
using pooling::Neighbor;
using pooling::PoolingGrid;

namespace {

Frustum facing_x(double gamma_deg, double depth)
{
  Frustum f;
  f.apex = {0.0, 0.0};
  f.direction = Eigen::Vector2d(1.0, 0.0);
  f.aperture = deg_to_rad(gamma_deg);
  f.depth = depth;
  return f;
}

// Independent dense oracle: scans every (m, n) cell for each neighbor and
// checks containment against the half-open cell bounds.
Eigen::VectorXd brute_force_pool(const Position & ego, const std::vector<Neighbor> & others,
                                 const Frustum & f, int n_cells, double cell, int d,
                                 bool use_frustum)
{
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cells) * n_cells * d);
  const double half = 0.5 * n_cells * cell;
  for (const auto & o : others) {
    if (use_frustum && !pooling::in_vfoa(f, o.position)) {
      continue;
    }
    if (!use_frustum && o.position == ego) {
      continue;
    }
    const double dx = o.position.x - ego.x;
    const double dy = o.position.y - ego.y;
    for (int m = 0; m < n_cells; ++m) {
      for (int n = 0; n < n_cells; ++n) {
        const bool in_m = dx >= m * cell - half && dx < (m + 1) * cell - half;
        const bool in_n = dy >= n * cell - half && dy < (n + 1) * cell - half;
        if (in_m && in_n) {
          dense.segment(static_cast<Eigen::Index>(m * n_cells + n) * d, d) += o.hidden;
        }
      }
    }
  }
  return dense;
}

}  // namespace

TEST_CASE("in_vfoa: spec cases at gamma 40 degrees")
{
  const Frustum f = facing_x(40.0, 6.4);
  CHECK(pooling::in_vfoa(f, {1.0, 0.0}));
  CHECK_FALSE(pooling::in_vfoa(f, {-1.0, 0.0}));
  CHECK_FALSE(pooling::in_vfoa(f, {1.0, std::tan(deg_to_rad(25.0))}));
  CHECK(pooling::in_vfoa(f, {1.0, std::tan(deg_to_rad(15.0))}));
  CHECK_FALSE(pooling::in_vfoa(f, {0.0, 0.0}));  // apex itself
  CHECK_FALSE(pooling::in_vfoa(f, {7.0, 0.0}));  // beyond depth
}

TEST_CASE("in_vfoa: boundary angle and boundary depth count as inside")
{
  // gamma/2 = atan2(1, 2) exactly, neighbor at (2, 1) sits exactly on it.
  Frustum f = facing_x(0.0, 10.0);
  f.aperture = 2.0 * std::atan2(1.0, 2.0);
  CHECK(pooling::in_vfoa(f, {2.0, 1.0}));
  CHECK(pooling::in_vfoa(f, {2.0, -1.0}));

  Frustum g = facing_x(40.0, 5.0);
  CHECK(pooling::in_vfoa(g, {5.0, 0.0}));       // exactly at depth
  CHECK_FALSE(pooling::in_vfoa(g, {5.0001, 0.0}));
}

TEST_CASE("pool_hidden_states: empty neighborhood gives the zero tensor")
{
  const Frustum f = facing_x(40.0, 3.2);
  const auto grid = pooling::pool_hidden_states({0, 0}, {}, f, 8, 0.8, 4);
  CHECK(grid.empty());
  CHECK(grid.dense().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pool_hidden_states: single member lands in exactly one cell")
{
  const Frustum f = facing_x(40.0, 3.2);
  Eigen::VectorXd h = Eigen::VectorXd::Unit(4, 0);
  const auto grid = pooling::pool_hidden_states({0, 0}, {{{1.0, 0.1}, h}}, f, 8, 0.8, 4);
  REQUIRE(grid.cells().size() == 1);
  CHECK((grid.cells()[0].second - h).cwiseAbs().maxCoeff() == 0.0);
  const auto dense = grid.dense();
  CHECK(dense.sum() == doctest::Approx(1.0));
}

TEST_CASE("pool_hidden_states: two members in one cell add")
{
  const Frustum f = facing_x(40.0, 3.2);
  Eigen::VectorXd u(3), v(3);
  u << 1.0, 2.0, 3.0;
  v << -4.0, 0.5, 1.0;
  // Same position, so necessarily the same cell.
  const auto grid =
    pooling::pool_hidden_states({0, 0}, {{{1.0, 0.0}, u}, {{1.0, 0.0}, v}}, f, 8, 0.8, 3);
  REQUIRE(grid.cells().size() == 1);
  CHECK((grid.cells()[0].second - (u + v)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pool_hidden_states: nothing lost or duplicated")
{
  Rng rng(31);
  const int d = 6;
  for (int trial = 0; trial < 200; ++trial) {
    const Position ego{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    Frustum f;
    f.apex = ego;
    const double ang = rng.uniform(-M_PI, M_PI);
    f.direction = Eigen::Vector2d(std::cos(ang), std::sin(ang));
    f.aperture = deg_to_rad(rng.uniform(20.0, 120.0));
    f.depth = 3.2;

    std::vector<Neighbor> others;
    Eigen::VectorXd member_sum = Eigen::VectorXd::Zero(d);
    const int n = 1 + static_cast<int>(rng.uniform_int(12));
    for (int k = 0; k < n; ++k) {
      Neighbor o;
      o.position = {ego.x + rng.uniform(-4, 4), ego.y + rng.uniform(-4, 4)};
      o.hidden = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
      others.push_back(o);
    }
    PoolingGrid grid(16, 0.4, d);
    for (const auto & o : others) {
      if (pooling::in_vfoa(f, o.position) && grid.cell_index(ego, o.position) >= 0) {
        member_sum += o.hidden;
      }
    }
    const auto pooled = pooling::pool_hidden_states(ego, others, f, 16, 0.4, d);
    Eigen::VectorXd cell_sum = Eigen::VectorXd::Zero(d);
    for (const auto & [cell, h] : pooled.cells()) {
      cell_sum += h;
    }
    CHECK((cell_sum - member_sum).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rotating the vislet by pi empties the frustum of dead-ahead members")
{
  Frustum f = facing_x(40.0, 3.2);
  const Position other{1.0, 0.0};
  CHECK(pooling::in_vfoa(f, other));
  f.direction = -f.direction;
  CHECK_FALSE(pooling::in_vfoa(f, other));
}

TEST_CASE("NoFrustum pooling is a superset of VFOA pooling")
{
  Rng rng(37);
  const int d = 4;
  for (int trial = 0; trial < 200; ++trial) {
    const Position ego{0, 0};
    Frustum f;
    f.apex = ego;
    const double ang = rng.uniform(-M_PI, M_PI);
    f.direction = Eigen::Vector2d(std::cos(ang), std::sin(ang));
    f.aperture = deg_to_rad(40.0);
    f.depth = 3.2;
    std::vector<Neighbor> others;
    for (int k = 0; k < 10; ++k) {
      Neighbor o;
      o.position = {rng.uniform(-4, 4), rng.uniform(-4, 4)};
      o.hidden = Eigen::VectorXd::Ones(d);
      others.push_back(o);
    }
    const auto vfoa = pooling::pool_hidden_states(ego, others, f, 16, 0.4, d, true);
    const auto grid_only = pooling::pool_hidden_states(ego, others, f, 16, 0.4, d, false);
    // Every VFOA contribution also appears without the frustum gate.
    CHECK(grid_only.dense().sum() >= vfoa.dense().sum() - 1e-12);
    for (const auto & o : others) {
      if (pooling::in_vfoa(f, o.position) && vfoa.cell_index(ego, o.position) >= 0) {
        CHECK(grid_only.cell_index(ego, o.position) >= 0);
      }
    }
  }
}

TEST_CASE("pooling equals the brute-force oracle exactly on random scenes")
{
  Rng rng(41);
  const int d = 5;
  const int n_cells = 16;
  const double cell = 0.4;
  for (int trial = 0; trial < 300; ++trial) {
    const Position ego{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Frustum f;
    f.apex = ego;
    const double ang = rng.uniform(-M_PI, M_PI);
    f.direction = Eigen::Vector2d(std::cos(ang), std::sin(ang));
    f.aperture = deg_to_rad(40.0);
    f.depth = 0.5 * n_cells * cell;
    std::vector<Neighbor> others;
    const int n = static_cast<int>(rng.uniform_int(20));
    for (int k = 0; k < n; ++k) {
      Neighbor o;
      o.position = {ego.x + rng.uniform(-4, 4), ego.y + rng.uniform(-4, 4)};
      o.hidden = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return rng.normal(); });
      others.push_back(o);
    }
    // Exact boundary case: a neighbor at exactly gamma/2 off axis.
    {
      Neighbor o;
      const double rho = rng.uniform(0.5, 2.0);
      const double half = 0.5 * f.aperture;
      const Eigen::Vector2d rotated(
        f.direction.x() * std::cos(half) - f.direction.y() * std::sin(half),
        f.direction.x() * std::sin(half) + f.direction.y() * std::cos(half));
      o.position = {ego.x + rho * rotated.x(), ego.y + rho * rotated.y()};
      o.hidden = Eigen::VectorXd::Ones(d);
      others.push_back(o);
    }
    const bool use_frustum = trial % 3 != 2;
    const auto pooled =
      pooling::pool_hidden_states(ego, others, f, n_cells, cell, d, use_frustum);
    const auto oracle = brute_force_pool(ego, others, f, n_cells, cell, d, use_frustum);
    CHECK((pooled.dense() - oracle).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("frustum built from a vislet is unit-length and anchored at the origin")
{
  const Vislet v{{1.3, 2.4}, {1.0, 2.0}};
  const auto f = Frustum::from_vislet(v, deg_to_rad(40.0), 3.2);
  CHECK(f.apex.x == doctest::Approx(1.0));
  CHECK(f.direction.norm() == doctest::Approx(1.0));
  CHECK(f.direction.x() == doctest::Approx(0.3 / 0.5));
}
