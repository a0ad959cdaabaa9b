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

#ifndef MXCAST__GAUSSIAN_HPP_
#define MXCAST__GAUSSIAN_HPP_

#include <Eigen/Dense>

#include <stdexcept>

#include "mxcast/rng.hpp"

namespace mxcast::gaussian {

// A d-variate Gaussian with full covariance is parameterized by d means and
// the d(d+1)/2 free entries of an upper-triangular factor L with
// Sigma = L^T L. The entries are packed row-major over the upper triangle:
// for d=4 that is (0,0),(0,1),(0,2),(0,3),(1,1),(1,2),(1,3),(2,2),(2,3),(3,3).
// Diagonal slots store log(l_kk) so any real vector maps to a valid positive
// definite covariance; off-diagonal slots are stored directly.

constexpr int theta_size(int dim) { return dim * (dim + 1) / 2; }

/// Packed slot index of diagonal entry (k,k) for dimension `dim`.
int diag_slot(int dim, int k);

/// Unconstrained parameters of one 4-variate Gaussian: 4 means + 10 theta.
struct LogCholParams {
  Eigen::Vector4d mu{Eigen::Vector4d::Zero()};
  Eigen::Matrix<double, 10, 1> theta{Eigen::Matrix<double, 10, 1>::Zero()};
};

struct Gaussian4 {
  Eigen::Vector4d mu;
  Eigen::Matrix4d sigma;
};

/// Builds the upper-triangular factor L from packed theta (diagonal slots
/// exponentiated). Throws on exp overflow.
Eigen::MatrixXd factor_from_theta(const Eigen::VectorXd & theta, int dim);

/// Extracts packed theta from an upper-triangular factor with positive diagonal.
Eigen::VectorXd theta_from_factor(const Eigen::MatrixXd & L);

/// Upper-triangular L with positive diagonal such that L^T L = sigma.
Eigen::MatrixXd upper_cholesky(const Eigen::MatrixXd & sigma);

/// Sigma = L^T L; exact by construction, positive definite for finite theta.
Gaussian4 reconstruct(const LogCholParams & params);

/// -log N(target; mu, Sigma) evaluated through the factor (no explicit inverse).
double nll(const Eigen::VectorXd & mu, const Eigen::VectorXd & theta,
           const Eigen::VectorXd & target);
double nll(const LogCholParams & params, const Eigen::Vector4d & target);

/// Analytic gradient of nll w.r.t. (mu, theta); layout [d means | packed theta].
Eigen::VectorXd nll_grad(const Eigen::VectorXd & mu, const Eigen::VectorXd & theta,
                         const Eigen::VectorXd & target);
Eigen::Matrix<double, 14, 1> nll_grad(const LogCholParams & params,
                                      const Eigen::Vector4d & target);

/// mu + L^T z with z standard normal, drawn from the caller's stream.
Eigen::Vector4d sample(const Gaussian4 & g, Rng & rng);
Eigen::VectorXd sample(const Eigen::VectorXd & mu, const Eigen::VectorXd & theta, Rng & rng);

// Bivariate parameterization used by the block-diagonal model head: means,
// log standard deviations, and a correlation squashed through tanh.
struct BivariateParams {
  double mu1{0.0};
  double mu2{0.0};
  double log_sigma1{0.0};
  double log_sigma2{0.0};
  double rho_raw{0.0};
};

Eigen::Matrix2d bivariate_sigma(const BivariateParams & p);

double bivariate_nll(const BivariateParams & p, double t1, double t2);

/// Gradient in parameter order (mu1, mu2, log_sigma1, log_sigma2, rho_raw).
Eigen::Matrix<double, 5, 1> bivariate_nll_grad(const BivariateParams & p, double t1, double t2);

Eigen::Vector2d bivariate_sample(const BivariateParams & p, Rng & rng);

class parameter_overflow_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mxcast::gaussian

#endif  // MXCAST__GAUSSIAN_HPP_
