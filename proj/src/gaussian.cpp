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

#include "mxcast/gaussian.hpp"

#include <cmath>

namespace mxcast::gaussian {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)
constexpr double kExpOverflow = 700.0;

// Row-major walk over the upper triangle; calls f(slot, i, j).
template <typename F>
void for_each_slot(int dim, F && f)
{
  int slot = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      f(slot++, i, j);
    }
  }
}

}  // namespace

int diag_slot(int dim, int k)
{
  // Row k starts after rows 0..k-1, which hold (dim - i) entries each.
  int s = 0;
  for (int i = 0; i < k; ++i) {
    s += dim - i;
  }
  return s;
}

Eigen::MatrixXd factor_from_theta(const Eigen::VectorXd & theta, int dim)
{
  if (theta.size() != theta_size(dim)) {
    throw std::invalid_argument("factor_from_theta: theta size mismatch");
  }
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim, dim);
  for_each_slot(dim, [&](int slot, int i, int j) {
    if (i == j) {
      if (std::abs(theta[slot]) > kExpOverflow) {
        throw parameter_overflow_error("factor_from_theta: diagonal log value overflows exp");
      }
      L(i, j) = std::exp(theta[slot]);
    } else {
      L(i, j) = theta[slot];
    }
  });
  return L;
}

Eigen::VectorXd theta_from_factor(const Eigen::MatrixXd & L)
{
  const int dim = static_cast<int>(L.rows());
  Eigen::VectorXd theta(theta_size(dim));
  for_each_slot(dim, [&](int slot, int i, int j) {
    theta[slot] = (i == j) ? std::log(L(i, j)) : L(i, j);
  });
  return theta;
}

Eigen::MatrixXd upper_cholesky(const Eigen::MatrixXd & sigma)
{
  // Sigma = R^T R with R upper triangular and positive diagonal; R is the
  // transpose of the lower factor of the standard LLT.
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("upper_cholesky: matrix not positive definite");
  }
  return llt.matrixL().transpose();
}

Gaussian4 reconstruct(const LogCholParams & params)
{
  const Eigen::MatrixXd L = factor_from_theta(params.theta, 4);
  Gaussian4 g;
  g.mu = params.mu;
  g.sigma = L.transpose() * L;
  return g;
}

double nll(const Eigen::VectorXd & mu, const Eigen::VectorXd & theta,
           const Eigen::VectorXd & target)
{
  const int dim = static_cast<int>(mu.size());
  const Eigen::MatrixXd L = factor_from_theta(theta, dim);
  const Eigen::VectorXd r = target - mu;
  // L^T z = r, forward substitution (L^T is lower triangular).
  const Eigen::VectorXd z =
    L.transpose().triangularView<Eigen::Lower>().solve(r);
  double log_det_half = 0.0;
  for (int k = 0; k < dim; ++k) {
    log_det_half += theta[diag_slot(dim, k)];
  }
  return 0.5 * dim * kLogTwoPi + log_det_half + 0.5 * z.squaredNorm();
}

double nll(const LogCholParams & params, const Eigen::Vector4d & target)
{
  return nll(Eigen::VectorXd(params.mu), Eigen::VectorXd(params.theta),
             Eigen::VectorXd(target));
}

Eigen::VectorXd nll_grad(const Eigen::VectorXd & mu, const Eigen::VectorXd & theta,
                         const Eigen::VectorXd & target)
{
  const int dim = static_cast<int>(mu.size());
  const Eigen::MatrixXd L = factor_from_theta(theta, dim);
  const Eigen::VectorXd r = target - mu;
  const Eigen::VectorXd z =
    L.transpose().triangularView<Eigen::Lower>().solve(r);
  // w = Sigma^{-1} r, via back substitution.
  const Eigen::VectorXd w = L.triangularView<Eigen::Upper>().solve(z);

  Eigen::VectorXd grad(dim + theta_size(dim));
  grad.head(dim) = -w;
  for_each_slot(dim, [&](int slot, int i, int j) {
    // d nll / d L_ij = delta_ij / l_ii - z_i w_j; diagonal slots chain
    // through l_ii = exp(theta).
    if (i == j) {
      grad[dim + slot] = 1.0 - z[i] * w[j] * L(i, i);
    } else {
      grad[dim + slot] = -z[i] * w[j];
    }
  });
  return grad;
}

Eigen::Matrix<double, 14, 1> nll_grad(const LogCholParams & params,
                                      const Eigen::Vector4d & target)
{
  return nll_grad(Eigen::VectorXd(params.mu), Eigen::VectorXd(params.theta),
                  Eigen::VectorXd(target));
}

Eigen::Vector4d sample(const Gaussian4 & g, Rng & rng)
{
  const Eigen::MatrixXd L = upper_cholesky(g.sigma);
  Eigen::Vector4d z;
  for (int k = 0; k < 4; ++k) {
    z[k] = rng.normal();
  }
  return g.mu + L.transpose() * z;
}

Eigen::VectorXd sample(const Eigen::VectorXd & mu, const Eigen::VectorXd & theta, Rng & rng)
{
  const int dim = static_cast<int>(mu.size());
  const Eigen::MatrixXd L = factor_from_theta(theta, dim);
  Eigen::VectorXd z(dim);
  for (int k = 0; k < dim; ++k) {
    z[k] = rng.normal();
  }
  return mu + L.transpose() * z;
}

Eigen::Matrix2d bivariate_sigma(const BivariateParams & p)
{
  const double s1 = std::exp(p.log_sigma1);
  const double s2 = std::exp(p.log_sigma2);
  const double rho = std::tanh(p.rho_raw);
  Eigen::Matrix2d sigma;
  sigma << s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2;
  return sigma;
}

double bivariate_nll(const BivariateParams & p, double t1, double t2)
{
  if (std::abs(p.log_sigma1) > kExpOverflow || std::abs(p.log_sigma2) > kExpOverflow) {
    throw parameter_overflow_error("bivariate_nll: log sigma overflows exp");
  }
  const double s1 = std::exp(p.log_sigma1);
  const double s2 = std::exp(p.log_sigma2);
  const double rho = std::tanh(p.rho_raw);
  const double d1 = t1 - p.mu1;
  const double d2 = t2 - p.mu2;
  const double q = 1.0 - rho * rho;
  const double zq = d1 * d1 / (s1 * s1) + d2 * d2 / (s2 * s2) - 2.0 * rho * d1 * d2 / (s1 * s2);
  return kLogTwoPi + p.log_sigma1 + p.log_sigma2 + 0.5 * std::log(q) + zq / (2.0 * q);
}

Eigen::Matrix<double, 5, 1> bivariate_nll_grad(const BivariateParams & p, double t1, double t2)
{
  const double s1 = std::exp(p.log_sigma1);
  const double s2 = std::exp(p.log_sigma2);
  const double rho = std::tanh(p.rho_raw);
  const double d1 = t1 - p.mu1;
  const double d2 = t2 - p.mu2;
  const double q = 1.0 - rho * rho;
  const double cross = d1 * d2 / (s1 * s2);
  const double zq = d1 * d1 / (s1 * s1) + d2 * d2 / (s2 * s2) - 2.0 * rho * cross;

  Eigen::Matrix<double, 5, 1> g;
  g[0] = -(d1 / (s1 * s1) - rho * d2 / (s1 * s2)) / q;
  g[1] = -(d2 / (s2 * s2) - rho * d1 / (s1 * s2)) / q;
  g[2] = 1.0 - (d1 * d1 / (s1 * s1) - rho * cross) / q;
  g[3] = 1.0 - (d2 * d2 / (s2 * s2) - rho * cross) / q;
  // d/d rho chained through rho = tanh(raw): multiply by q.
  g[4] = -rho - cross + zq * rho / q;
  return g;
}

Eigen::Vector2d bivariate_sample(const BivariateParams & p, Rng & rng)
{
  const double s1 = std::exp(p.log_sigma1);
  const double s2 = std::exp(p.log_sigma2);
  const double rho = std::tanh(p.rho_raw);
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  Eigen::Vector2d out;
  out[0] = p.mu1 + s1 * z1;
  out[1] = p.mu2 + s2 * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
  return out;
}

}  // namespace mxcast::gaussian
