#pragma once

// Random instance generators and dense reference computations shared by the test binaries.
// The references deliberately avoid the library's eigendecomposition path: they form and
// solve the normal equations directly.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "sdridge/dataset.hpp"
#include "sdridge/structural.hpp"

namespace sdtest {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Gen = std::mt19937_64;

inline double uniform(Gen& g, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); }

inline double log_uniform(Gen& g, double lo, double hi) {
  return std::exp(uniform(g, std::log(lo), std::log(hi)));
}

inline MatrixXd gaussian_matrix(Gen& g, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(g);
  return m;
}

inline VectorXd gaussian_vector(Gen& g, Eigen::Index n) { return gaussian_matrix(g, n, 1).col(0); }

/// Well-conditioned random SPD matrix with unit average eigenvalue.
inline MatrixXd random_spd(Gen& g, Eigen::Index p) {
  const MatrixXd a = gaussian_matrix(g, p, 2 * p);
  MatrixXd s = a * a.transpose() / static_cast<double>(2 * p) + 0.2 * MatrixXd::Identity(p, p);
  return s / (s.trace() / static_cast<double>(p));
}

inline MatrixXd sqrt_spd(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Linear-model instance with known population (Sigma, beta, sigma^2).
struct Instance {
  MatrixXd sigma;
  VectorXd beta;
  double noise_var = 1.0;
  sdridge::Dataset train;

  [[nodiscard]] sdridge::Population population() const { return {sigma, beta, noise_var}; }
};

inline Instance random_instance(Gen& g, Eigen::Index n, Eigen::Index p) {
  Instance ins;
  ins.sigma = random_spd(g, p);
  ins.beta = gaussian_vector(g, p) * uniform(g, 0.5, 1.5) / std::sqrt(static_cast<double>(p));
  ins.noise_var = uniform(g, 0.2, 2.0);
  const MatrixXd x = gaussian_matrix(g, n, p) * sqrt_spd(ins.sigma);
  const VectorXd y = x * ins.beta + std::sqrt(ins.noise_var) * gaussian_vector(g, n);
  ins.train = sdridge::Dataset(x, y);
  return ins;
}

/// (X^T X / n + lambda I)^{-1} X^T y / n by a dense Cholesky solve.
inline VectorXd dense_ridge(const MatrixXd& x, const VectorXd& y, double lambda) {
  const double n = static_cast<double>(x.rows());
  const MatrixXd a = x.transpose() * x / n + lambda * MatrixXd::Identity(x.cols(), x.cols());
  return a.llt().solve(x.transpose() * y / n);
}

/// Hat matrix X (X^T X / n + lambda I)^{-1} X^T / n.
inline MatrixXd dense_hat(const MatrixXd& x, double lambda) {
  const double n = static_cast<double>(x.rows());
  const MatrixXd a = x.transpose() * x / n + lambda * MatrixXd::Identity(x.cols(), x.cols());
  return x * a.llt().solve(x.transpose()) / n;
}

/// ||b - beta||_Sigma^2 + sigma^2.
inline double oracle_risk(const VectorXd& b, const Instance& ins) {
  const VectorXd e = b - ins.beta;
  return e.dot(ins.sigma * e) + ins.noise_var;
}

/// Exact dR/dlambda for ridge from d beta / d lambda = -(Sigma_hat + lambda I)^{-1} beta_lambda.
inline double dense_risk_derivative(const Instance& ins, double lambda) {
  const MatrixXd& x = ins.train.X;
  const double n = static_cast<double>(x.rows());
  const MatrixXd a = x.transpose() * x / n + lambda * MatrixXd::Identity(x.cols(), x.cols());
  const VectorXd b = dense_ridge(x, ins.train.y, lambda);
  const VectorXd db = -a.llt().solve(b);
  return 2.0 * db.dot(ins.sigma * (b - ins.beta));
}

inline double rel_err(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace sdtest
