#pragma once

// Extensions of one-round SD: recursive and anchored multi-round distillation, fresh-X
// students, and the derivative-based sign rule for general ridge smoothers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sdridge/ridge.hpp"
#include "sdridge/smoother.hpp"
#include "sdridge/structural.hpp"
#include "sdridge/tuning.hpp"

namespace sdridge {

// ---------------------------------------------------------------------------------------
// Multi-round self-distillation

enum class MultiroundMode { recursive, anchored };

struct OracleRisk {
  Population population;
};
struct TestSetRisk {
  Dataset test;
};
struct GcvRisk {};

using RiskSource = std::variant<OracleRisk, TestSetRisk, GcvRisk>;

struct RoundState {
  std::size_t round = 0;
  VectorXd labels;  // y^(k)
  RidgeFit teacher;
  std::vector<double> xi_history;    // xi_1 .. xi_k
  std::vector<double> risk_history;  // R_0 .. R_k
  std::vector<bool> degenerate_history;
};

namespace detail {

/// Risk components of the pair (base, pd) where both are ridge smoothers of the original
/// labels y^(0) with hat-eigenvalue weights base_w and pd_w (used only by the GCV source).
inline RiskComponents round_components(const RidgeSolver& solver, const RiskSource& source, const RidgeFit& base,
                                       const RidgeFit& pd, const VectorXd& base_w, const VectorXd& pd_w) {
  return std::visit(
      [&](const auto& src) -> RiskComponents {
        using T = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<T, OracleRisk>) {
          return risk_components_oracle(base.beta, pd.beta, src.population);
        } else if constexpr (std::is_same_v<T, TestSetRisk>) {
          return risk_components_empirical(base, pd, src.test);
        } else {
          const VectorXd& y0 = solver.response();
          const GcvResiduals res = gcv_residuals_from(y0, solver.design() * base.beta, solver.design() * pd.beta,
                                                      base_w.sum(), pd_w.sum());
          const GcvEstimates est = one_shot_from(res, base.lambda);
          return {est.r_hat, est.r_pd_hat, est.c_hat, est.d_hat};
        }
      },
      source);
}

inline double fit_risk(const RidgeSolver& solver, const RiskSource& source, const RidgeFit& fit,
                       const VectorXd& weight) {
  return round_components(solver, source, fit, fit, weight, weight).r_teacher;
}

}  // namespace detail

/// Runs `rounds` rounds of SD at fixed lambda, choosing each round's xi by the closed form
/// against the given risk source.
///
/// Recursive: y^(k+1) = (1 - xi) y^(k) + xi y_hat^(k); the round-k pair is (f^(k), f_pd^(k)).
/// Anchored:  y^(k+1) = (1 - xi) y^(0) + xi y_hat^(k); the round-k pair is (f^(0), f_pd^(k)).
/// Returns states for rounds 0..rounds.
inline std::vector<RoundState> multiround(const RidgeSolver& solver, double lambda, std::size_t rounds,
                                          MultiroundMode mode, const RiskSource& source) {
  require_positive_lambda(lambda);
  if (rounds < 1) throw ParameterError("rounds must be at least 1");
  const VectorXd& y0 = solver.response();
  const VectorXd h = solver.hat_eigenvalues(lambda);
  // Labels are P_k(H) y0; track P_k on the hat eigenvalues for GCV degrees of freedom.
  VectorXd poly = VectorXd::Ones(h.size());

  const RidgeFit origin = fit_ridge(solver, y0, lambda);
  std::vector<RoundState> states;
  states.reserve(rounds + 1);
  RoundState cur;
  cur.round = 0;
  cur.labels = y0;
  cur.teacher = origin;
  cur.risk_history.push_back(detail::fit_risk(solver, source, origin, h));
  states.push_back(cur);

  for (std::size_t k = 0; k < rounds; ++k) {
    const RidgeFit pd = pd_refit(solver, cur.teacher);
    const VectorXd yhat = solver.design() * cur.teacher.beta;
    const bool rec = mode == MultiroundMode::recursive;
    const RidgeFit& base = rec ? cur.teacher : origin;
    const VectorXd base_w = rec ? VectorXd(h.cwiseProduct(poly)) : h;
    const VectorXd pd_w = h.cwiseProduct(h).cwiseProduct(poly);
    const RiskComponents rc = detail::round_components(solver, source, base, pd, base_w, pd_w);
    const MixResult mix = optimal_mix(rc);

    RoundState next;
    next.round = k + 1;
    next.labels = (1.0 - mix.xi_star) * (rec ? cur.labels : y0) + mix.xi_star * yhat;
    if (rec) {
      poly = poly.cwiseProduct(((1.0 - mix.xi_star) + mix.xi_star * h.array()).matrix());
    } else {
      poly = ((1.0 - mix.xi_star) + mix.xi_star * h.array() * poly.array()).matrix();
    }
    next.teacher = fit_ridge(solver, next.labels, lambda);
    next.xi_history = cur.xi_history;
    next.xi_history.push_back(mix.xi_star);
    next.degenerate_history = cur.degenerate_history;
    next.degenerate_history.push_back(mix.degenerate);
    next.risk_history = cur.risk_history;
    next.risk_history.push_back(detail::fit_risk(solver, source, next.teacher, h.cwiseProduct(poly)));
    states.push_back(next);
    cur = std::move(next);
  }
  return states;
}

// ---------------------------------------------------------------------------------------
// Fresh-X students

enum class FreshMode { mixed_loss, affine };

struct FreshStudent {
  FreshMode mode = FreshMode::affine;
  double xi = 0.0;
  VectorXd beta;
  bool convex = true;
};

/// Precomputed fresh-X path for one (train, fresh X, lambda).
///
/// The mixed-loss Hessian is A_xi = B + xi Delta with B = Sigma_hat + lambda I and
/// Delta = Sigma_tilde - Sigma_hat. With the generalized eigenpairs Delta w = mu B w
/// (W^T B W = I), A_xi^{-1} = W diag(1 / (1 + xi mu)) W^T, so each xi costs O(p^2).
class FreshPath {
 public:
  FreshPath(const RidgeSolver& train, const MatrixXd& fresh_x, double lambda) : lambda_(lambda) {
    require_positive_lambda(lambda);
    if (fresh_x.cols() != train.p()) throw DataError("fresh design has wrong number of columns");
    if (fresh_x.rows() < 1) throw DataError("fresh design is empty");
    if (!fresh_x.allFinite()) throw DataError("fresh design contains non-finite entries");
    const Eigen::Index p = train.p();
    const double n = static_cast<double>(train.n());
    const double m = static_cast<double>(fresh_x.rows());
    const MatrixXd& X = train.design();
    sigma_hat_ = X.transpose() * X / n;
    sigma_tilde_ = fresh_x.transpose() * fresh_x / m;
    crossmoment_ = X.transpose() * train.response() / n;
    teacher_ = train.coefficients(lambda);
    pseudo_moment_ = sigma_tilde_ * teacher_;  // X~^T y~ / m with y~ = X~ beta_lambda

    const MatrixXd reg = sigma_tilde_ + lambda * MatrixXd::Identity(p, p);
    Eigen::LLT<MatrixXd> llt(reg);
    pd_fresh_ = llt.solve(pseudo_moment_);

    const MatrixXd b = sigma_hat_ + lambda * MatrixXd::Identity(p, p);
    const MatrixXd delta = sigma_tilde_ - sigma_hat_;
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(delta, b);
    if (ges.info() != Eigen::Success) throw NumericError("generalized eigendecomposition failed");
    mu_ = ges.eigenvalues();
    w_ = ges.eigenvectors();
  }

  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] const VectorXd& teacher() const { return teacher_; }
  /// Ridge refit on (X~, X~ beta_lambda).
  [[nodiscard]] const VectorXd& fresh_pd() const { return pd_fresh_; }

  /// Open interval of xi where A_xi is positive definite.
  [[nodiscard]] std::pair<double, double> convex_interval() const {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < mu_.size(); ++i) {
      if (mu_(i) > 0.0) lo = std::max(lo, -1.0 / mu_(i));
      if (mu_(i) < 0.0) hi = std::min(hi, -1.0 / mu_(i));
    }
    return {lo, hi};
  }

  [[nodiscard]] bool is_convex(double xi) const {
    return ((1.0 + xi * mu_.array()).minCoeff()) > 1e-10;
  }

  [[nodiscard]] VectorXd affine(double xi) const { return (1.0 - xi) * teacher_ + xi * pd_fresh_; }

  /// Mixed-loss minimizer via the generalized eigenbasis; caller ensures convexity.
  [[nodiscard]] VectorXd mixed(double xi) const {
    const VectorXd rhs = (1.0 - xi) * crossmoment_ + xi * pseudo_moment_;
    return w_ * ((w_.transpose() * rhs).array() / (1.0 + xi * mu_.array())).matrix();
  }

  [[nodiscard]] MatrixXd hessian(double xi) const {
    const Eigen::Index p = sigma_hat_.rows();
    return (1.0 - xi) * sigma_hat_ + xi * sigma_tilde_ + lambda_ * MatrixXd::Identity(p, p);
  }

  [[nodiscard]] VectorXd mixed_rhs(double xi) const { return (1.0 - xi) * crossmoment_ + xi * pseudo_moment_; }

 private:
  double lambda_;
  MatrixXd sigma_hat_, sigma_tilde_;
  VectorXd crossmoment_, pseudo_moment_, teacher_, pd_fresh_;
  VectorXd mu_;
  MatrixXd w_;
};

/// Fresh-X student at one xi. Mixed-loss mode solves A_xi beta = (1 - xi) X^T y / n + xi Sigma_tilde beta_lambda
/// and rejects xi where the smallest eigenvalue of A_xi is not above 1e-10.
inline FreshStudent freshx_fit(const RidgeSolver& train, const MatrixXd& fresh_x, double lambda, double xi,
                               FreshMode mode) {
  const FreshPath path(train, fresh_x, lambda);
  FreshStudent out;
  out.mode = mode;
  out.xi = xi;
  if (mode == FreshMode::affine) {
    out.beta = path.affine(xi);
    return out;
  }
  const MatrixXd a = path.hessian(xi);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  out.convex = es.eigenvalues().minCoeff() > 1e-10;
  if (!out.convex) {
    throw ConvexityError("mixed-loss objective is not strictly convex at xi=" + std::to_string(xi));
  }
  out.beta = a.ldlt().solve(path.mixed_rhs(xi));
  return out;
}

struct FreshScan {
  double best_xi = 0.0;
  double best_risk = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> local_minima;  // (xi, risk) over the convex part of the grid
  std::size_t evaluated = 0;
};

/// Grid search of the fresh-X mixed-loss risk over xi, skipping non-convex xi.
inline FreshScan freshx_mixed_scan(const FreshPath& path, std::span<const double> xi_grid,
                                   const std::function<double(const VectorXd&)>& risk) {
  FreshScan out;
  std::vector<std::pair<double, double>> vals;
  vals.reserve(xi_grid.size());
  for (double xi : xi_grid) {
    if (!path.is_convex(xi)) {
      vals.emplace_back(xi, std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double r = risk(path.mixed(xi));
    ++out.evaluated;
    vals.emplace_back(xi, r);
    if (r < out.best_risk) {
      out.best_risk = r;
      out.best_xi = xi;
    }
  }
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double r = vals[i].second;
    if (std::isnan(r)) continue;
    const bool left = i == 0 || std::isnan(vals[i - 1].second) || r <= vals[i - 1].second;
    const bool right = i + 1 == vals.size() || std::isnan(vals[i + 1].second) || r <= vals[i + 1].second;
    if (left && right) out.local_minima.push_back(vals[i]);
  }
  if (out.evaluated == 0) throw ConvexityError("no convex xi on the scan grid");
  return out;
}

// ---------------------------------------------------------------------------------------
// Ridge-smoother families

struct SmootherSdResult {
  double xi_star = 0.0;
  double r_sd_star = 0.0;
  double r_teacher = 0.0;
  RiskComponents components;
  double slope = 0.0;  // R'(lambda) from the tangent identity
  bool degenerate = false;
};

/// Optimal SD for a linear-smoother ridge family, with risks measured on a test set.
///
/// The family is probed for the tangent identity at the first test point (relative 1e-6)
/// and rejected if it fails.
template <LinearSmoother F>
SmootherSdResult smoother_sd(const F& family, double lambda, const Dataset& test) {
  require_positive_lambda(lambda);
  if (test.n() == 0) throw DataError("empty test set");
  const RidgeFit teacher = family.fit(family.labels(), lambda);
  const RidgeFit pd = family.pd_refit(teacher);

  RidgeFit deriv = teacher;
  deriv.beta = family.lambda_derivative(teacher);
  const MatrixXd probe = test.X.topRows(1);
  const double f = family.predict(teacher, probe)(0);
  const double f_pd = family.predict(pd, probe)(0);
  const double df = lambda * family.predict(deriv, probe)(0);
  const double scale = std::abs(f) + std::abs(f_pd) + std::abs(df);
  if (std::abs(f - f_pd + df) > 1e-6 * scale + 1e-300) {
    throw ParameterError(std::string("smoother family violates the tangent identity: ") + to_string(family.kind()));
  }

  const RiskComponents rc =
      risk_components_empirical(family.predict(teacher, test.X), family.predict(pd, test.X), test.y);
  const MixResult mix = optimal_mix(rc);
  return {mix.xi_star, mix.r_sd_star, rc.r_teacher, rc, risk_slope(rc, lambda), mix.degenerate};
}

}  // namespace sdridge
