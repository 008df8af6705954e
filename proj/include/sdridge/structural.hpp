#pragma once

// Conditional (finite-sample) identities of optimal self-distillation.
//
// Given the teacher risk R, pure-distilled risk R_pd and residual cross term C at one
// lambda, the SD risk along the affine path is the quadratic
//   R_sd(xi) = R - 2 xi (R - C) + xi^2 D,   D = R + R_pd - 2C >= 0,
// so the optimum is available in closed form.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sdridge/dataset.hpp"
#include "sdridge/errors.hpp"
#include "sdridge/ridge.hpp"

namespace sdridge {

struct RiskComponents {
  double r_teacher = 0.0;  // R
  double r_pd = 0.0;       // R_pd
  double c_cross = 0.0;    // C
  double d_gap = 0.0;      // D = R + R_pd - 2C, evaluated directly where possible

  /// Cauchy-Schwarz on the residuals: C^2 <= R R_pd.
  [[nodiscard]] bool cauchy_schwarz_ok(double tol = 1e-10) const {
    return c_cross * c_cross <= r_teacher * r_pd + tol * std::max(1.0, r_teacher * r_pd);
  }
};

/// D below this is treated as a flat SD path.
inline double degeneracy_threshold(const RiskComponents& rc) {
  return 1e-12 * std::max({rc.r_teacher, rc.r_pd, 1.0});
}

inline double clamp_gap(double d) {
  if (d < -1e-12) throw NumericError("negative teacher/PD prediction gap: " + std::to_string(d));
  return std::max(d, 0.0);
}

/// Test-set averages of e^2, e_pd^2 and e e_pd; D is the mean squared prediction gap.
inline RiskComponents risk_components_empirical(const VectorXd& teacher_pred, const VectorXd& pd_pred,
                                                const VectorXd& y_test) {
  const Eigen::Index m = y_test.size();
  if (m == 0) throw DataError("empty test set");
  if (teacher_pred.size() != m || pd_pred.size() != m) throw DataError("prediction length mismatch");
  const VectorXd e = y_test - teacher_pred;
  const VectorXd e_pd = y_test - pd_pred;
  const double inv = 1.0 / static_cast<double>(m);
  return {e.squaredNorm() * inv, e_pd.squaredNorm() * inv, e.dot(e_pd) * inv,
          (teacher_pred - pd_pred).squaredNorm() * inv};
}

inline RiskComponents risk_components_empirical(const RidgeFit& teacher, const RidgeFit& pd,
                                                const Dataset& test) {
  if (test.n() == 0) throw DataError("empty test set");
  if (teacher.beta.size() != test.p() || pd.beta.size() != test.p()) {
    throw DataError("test set dimension does not match fit");
  }
  return risk_components_empirical(test.X * teacher.beta, test.X * pd.beta, test.y);
}

/// Population linear model (Sigma, beta, sigma^2) used as the exact risk oracle.
struct Population {
  MatrixXd sigma;
  VectorXd beta;
  double noise_var = 0.0;

  Population(MatrixXd cov, VectorXd signal, double noise)
      : sigma(std::move(cov)), beta(std::move(signal)), noise_var(noise) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != beta.size()) {
      throw DataError("population covariance and signal dimensions disagree");
    }
    if (!(noise_var >= 0.0)) throw ParameterError("noise variance must be nonnegative");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw DataError("population covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) throw DataError("population covariance is not PSD");
  }

  [[nodiscard]] double sigma_inner(const VectorXd& u, const VectorXd& v) const { return u.dot(sigma * v); }
};

/// Exact conditional risks: R = ||b - beta||_Sigma^2 + sigma^2, C = <b - beta, b_pd - beta>_Sigma + sigma^2.
inline RiskComponents risk_components_oracle(const VectorXd& teacher_beta, const VectorXd& pd_beta,
                                             const Population& pop) {
  if (teacher_beta.size() != pop.beta.size() || pd_beta.size() != pop.beta.size()) {
    throw DataError("coefficient dimension does not match population");
  }
  const VectorXd et = teacher_beta - pop.beta;
  const VectorXd ep = pd_beta - pop.beta;
  const VectorXd st = pop.sigma * et;
  const VectorXd sp = pop.sigma * ep;
  const VectorXd gap = teacher_beta - pd_beta;
  return {et.dot(st) + pop.noise_var, ep.dot(sp) + pop.noise_var, et.dot(sp) + pop.noise_var,
          std::max(gap.dot(pop.sigma * gap), 0.0)};
}

inline RiskComponents risk_components_oracle(const RidgeFit& teacher, const RidgeFit& pd, const MatrixXd& sigma_pop,
                                             const VectorXd& beta_pop, double noise_var) {
  return risk_components_oracle(teacher.beta, pd.beta, Population(sigma_pop, beta_pop, noise_var));
}

struct MixResult {
  double xi_star = 0.0;
  double r_sd_star = 0.0;
  bool degenerate = false;
};

inline MixResult optimal_mix(const RiskComponents& rc) {
  const double d = rc.d_gap;
  if (!(d > degeneracy_threshold(rc))) return {0.0, rc.r_teacher, true};
  const double num = rc.r_teacher - rc.c_cross;
  const double r_sd = rc.r_teacher - num * num / d;
  return {num / d, std::min(r_sd, rc.r_teacher), false};
}

/// R_sd(xi) = R - 2 xi (R - C) + xi^2 D.
inline double sd_risk_at(const RiskComponents& rc, double xi) {
  return rc.r_teacher - 2.0 * xi * (rc.r_teacher - rc.c_cross) + xi * xi * rc.d_gap;
}

/// R'(lambda) from the tangent identity R - C = -(lambda / 2) R'.
inline double risk_slope(const RiskComponents& rc, double lambda) {
  require_positive_lambda(lambda);
  return -2.0 * (rc.r_teacher - rc.c_cross) / lambda;
}

struct CurvatureResult {
  double lambda_star = 0.0;
  double r_at_star = 0.0;
  double r_second_derivative = 0.0;
  double d_at_star = 0.0;
  bool interior = false;  // grid minimum is not at an endpoint
  bool passes = false;    // D(lambda*) < lambda*^2 / 2 R''(lambda*)
};

/// Curvature test at the ridge-optimal lambda.
///
/// Locates argmin R on the grid, refines it by golden-section search in log-lambda to
/// relative 1e-4, then estimates R'' by central differences with step 1e-3 lambda*.
inline CurvatureResult curvature_test(const std::function<RiskComponents(double)>& risk_at,
                                      std::span<const double> grid) {
  if (grid.size() < 3) throw ParameterError("curvature test needs at least three grid points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require_positive_lambda(grid[i]);
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ParameterError("lambda grid must be strictly increasing");
  }
  std::vector<double> r(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) r[i] = risk_at(grid[i]).r_teacher;
  const auto best = static_cast<std::size_t>(std::min_element(r.begin(), r.end()) - r.begin());

  CurvatureResult out;
  if (best == 0 || best + 1 == grid.size()) {
    out.lambda_star = grid[best];
    out.r_at_star = r[best];
    return out;
  }
  out.interior = true;

  auto risk_log = [&](double t) { return risk_at(std::exp(t)).r_teacher; };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(grid[best - 1]);
  double b = std::log(grid[best + 1]);
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = risk_log(c);
  double fd = risk_log(d);
  // relative tolerance 1e-4 on lambda is an absolute tolerance on log-lambda
  while (b - a > 1e-4) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = risk_log(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = risk_log(d);
    }
  }
  const double lam = std::exp(0.5 * (a + b));
  const double h = 1e-3 * lam;
  const RiskComponents mid = risk_at(lam);
  const double rp = risk_at(lam + h).r_teacher;
  const double rm = risk_at(lam - h).r_teacher;
  out.lambda_star = lam;
  out.r_at_star = mid.r_teacher;
  out.r_second_derivative = (rp - 2.0 * mid.r_teacher + rm) / (h * h);
  out.d_at_star = mid.d_gap;
  out.passes = out.d_at_star < 0.5 * lam * lam * out.r_second_derivative;
  return out;
}

}  // namespace sdridge
