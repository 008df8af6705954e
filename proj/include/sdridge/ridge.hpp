#pragma once

// Ordinary ridge teacher, pure-distilled refit and the affine self-distillation path.
//
// All per-lambda quantities are evaluated from one symmetric eigendecomposition of the
// sample covariance (or of the Gram matrix when p > n), so a full lambda grid costs a
// single factorization.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "sdridge/dataset.hpp"
#include "sdridge/errors.hpp"

namespace sdridge {

enum class SmootherKind { ordinary, generalized, kernel };

inline const char* to_string(SmootherKind k) {
  switch (k) {
    case SmootherKind::ordinary: return "ordinary";
    case SmootherKind::generalized: return "generalized";
    case SmootherKind::kernel: return "kernel";
  }
  return "?";
}

/// Coefficients of a ridge-type fit at one penalty level.
///
/// For the ordinary and generalized families `beta` is the primal p-vector; for the
/// kernel family it holds the dual weights (an n-vector) multiplying k(x, x_i).
struct RidgeFit {
  double lambda = 0.0;
  VectorXd beta;
  SmootherKind family = SmootherKind::ordinary;
};

struct HatTraces {
  double df = 0.0;     // tr(H)
  double df_pd = 0.0;  // tr(H^2)
};

inline void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("lambda must be positive and finite, got " + std::to_string(lambda));
  }
}

/// Spectral factorization of the sample covariance Sigma_hat = X^T X / n.
///
/// Stores eigenpairs (s_i, v_i) sorted by decreasing s_i. When p <= n all p directions
/// are kept; when p > n only the min(n, p) directions of the row space are formed via the
/// push-through identity. Eigenvalues below 1e-12 * max are clamped to zero (and, in the
/// p > n route, dropped since their direction cannot be normalized).
class RidgeSolver {
 public:
  static constexpr double kRankTol = 1e-12;

  explicit RidgeSolver(const Dataset& data) : X_(data.X), y_(data.y) {
    data.validate();
    const double n = static_cast<double>(X_.rows());
    if (X_.cols() <= X_.rows()) {
      const MatrixXd cov = (X_.transpose() * X_) / n;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
      if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of X^T X / n failed");
      evals_ = es.eigenvalues().reverse();
      evecs_ = es.eigenvectors().rowwise().reverse();
      const double top = std::max(evals_.size() > 0 ? evals_(0) : 0.0, 0.0);
      for (Eigen::Index i = 0; i < evals_.size(); ++i) {
        if (evals_(i) < kRankTol * top) evals_(i) = 0.0;
      }
    } else {
      const MatrixXd gram = (X_ * X_.transpose()) / n;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
      if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of X X^T / n failed");
      const VectorXd s = es.eigenvalues().reverse();
      const MatrixXd u = es.eigenvectors().rowwise().reverse();
      const double top = std::max(s(0), 0.0);
      Eigen::Index r = 0;
      while (r < s.size() && s(r) >= kRankTol * top && s(r) > 0.0) ++r;
      evals_ = s.head(r);
      evecs_.resize(X_.cols(), r);
      for (Eigen::Index i = 0; i < r; ++i) {
        evecs_.col(i) = X_.transpose() * u.col(i) / std::sqrt(n * s(i));
      }
    }
    crossmoment_ = rotate(y_);
  }

  [[nodiscard]] Eigen::Index n() const { return X_.rows(); }
  [[nodiscard]] Eigen::Index p() const { return X_.cols(); }
  [[nodiscard]] const MatrixXd& design() const { return X_; }
  [[nodiscard]] const VectorXd& response() const { return y_; }
  [[nodiscard]] const VectorXd& eigenvalues() const { return evals_; }
  [[nodiscard]] const MatrixXd& eigenvectors() const { return evecs_; }
  /// V^T (X^T y / n) for the training response.
  [[nodiscard]] const VectorXd& rotated_crossmoment() const { return crossmoment_; }

  /// V^T (X^T labels / n).
  [[nodiscard]] VectorXd rotate(const VectorXd& labels) const {
    if (labels.size() != n()) throw DataError("label vector length does not match design rows");
    return evecs_.transpose() * (X_.transpose() * labels / static_cast<double>(n()));
  }

  /// Ridge coefficients (Sigma_hat + lambda I)^{-1} X^T labels / n.
  [[nodiscard]] VectorXd coefficients(const VectorXd& labels, double lambda) const {
    require_positive_lambda(lambda);
    return from_rotated(rotate(labels), lambda);
  }

  [[nodiscard]] VectorXd coefficients(double lambda) const {
    require_positive_lambda(lambda);
    return from_rotated(crossmoment_, lambda);
  }

  /// Q_lambda v = (Sigma_hat + lambda I)^{-1} v for an arbitrary p-vector.
  [[nodiscard]] VectorXd resolvent_apply(const VectorXd& v, double lambda) const {
    require_positive_lambda(lambda);
    if (v.size() != p()) throw DataError("vector length does not match p");
    const VectorXd coord = evecs_.transpose() * v;
    VectorXd out = (v - evecs_ * coord) / lambda;
    out.noalias() += evecs_ * (coord.array() / (evals_.array() + lambda)).matrix();
    return out;
  }

  /// Q_lambda Sigma_hat v, the coefficient map of a ridge refit on labels X v.
  [[nodiscard]] VectorXd shrink(const VectorXd& v, double lambda) const {
    require_positive_lambda(lambda);
    if (v.size() != p()) throw DataError("vector length does not match p");
    const VectorXd coord = evecs_.transpose() * v;
    return evecs_ * (coord.array() * evals_.array() / (evals_.array() + lambda)).matrix();
  }

  /// Eigenvalues s_i / (s_i + lambda) of the hat matrix on its nonzero directions.
  [[nodiscard]] VectorXd hat_eigenvalues(double lambda) const {
    require_positive_lambda(lambda);
    return (evals_.array() / (evals_.array() + lambda)).matrix();
  }

 private:
  [[nodiscard]] VectorXd from_rotated(const VectorXd& c, double lambda) const {
    return evecs_ * (c.array() / (evals_.array() + lambda)).matrix();
  }

  MatrixXd X_;
  VectorXd y_;
  VectorXd evals_;
  MatrixXd evecs_;
  VectorXd crossmoment_;
};

inline RidgeFit fit_ridge(const RidgeSolver& solver, double lambda) {
  return {lambda, solver.coefficients(lambda), SmootherKind::ordinary};
}

inline RidgeFit fit_ridge(const RidgeSolver& solver, const VectorXd& labels, double lambda) {
  return {lambda, solver.coefficients(labels, lambda), SmootherKind::ordinary};
}

inline RidgeFit fit_ridge(const Dataset& data, double lambda) {
  require_positive_lambda(lambda);
  return fit_ridge(RidgeSolver(data), lambda);
}

inline void check_ordinary_fit(const RidgeSolver& solver, const RidgeFit& fit) {
  if (fit.family != SmootherKind::ordinary) throw ParameterError("expected an ordinary ridge fit");
  if (fit.beta.size() != solver.p()) throw DataError("fit dimension does not match data");
}

/// Ridge refit on the teacher's own fitted values: beta_pd = Q Sigma_hat beta = (I - lambda Q) beta.
inline RidgeFit pd_refit(const RidgeSolver& solver, const RidgeFit& teacher) {
  check_ordinary_fit(solver, teacher);
  return {teacher.lambda, solver.shrink(teacher.beta, teacher.lambda), SmootherKind::ordinary};
}

/// Point on the affine path (1 - xi) f_teacher + xi f_pd.
inline double sd_predict(const RidgeFit& teacher, const RidgeFit& pd, double xi, const VectorXd& x0) {
  if (teacher.beta.size() != x0.size() || pd.beta.size() != x0.size()) {
    throw DataError("prediction point dimension mismatch");
  }
  return (1.0 - xi) * x0.dot(teacher.beta) + xi * x0.dot(pd.beta);
}

/// SD coefficients of the path (1 - xi) beta + xi beta_pd.
inline VectorXd sd_coefficients(const RidgeFit& teacher, const RidgeFit& pd, double xi) {
  if (teacher.beta.size() != pd.beta.size()) throw DataError("teacher/pd dimension mismatch");
  return (1.0 - xi) * teacher.beta + xi * pd.beta;
}

/// Ridge refit on mixed labels (1 - xi) y + xi y_hat. Solved from the labels, not from the path.
inline RidgeFit mixed_label_fit(const RidgeSolver& solver, double lambda, double xi) {
  const RidgeFit teacher = fit_ridge(solver, lambda);
  const VectorXd labels = (1.0 - xi) * solver.response() + xi * (solver.design() * teacher.beta);
  return fit_ridge(solver, labels, lambda);
}

/// d beta_lambda / d lambda = -Q_lambda beta_lambda.
inline VectorXd lambda_derivative(const RidgeSolver& solver, const RidgeFit& fit) {
  check_ordinary_fit(solver, fit);
  return -solver.resolvent_apply(fit.beta, fit.lambda);
}

inline HatTraces hat_traces(const RidgeSolver& solver, double lambda) {
  const VectorXd h = solver.hat_eigenvalues(lambda);
  return {h.sum(), h.squaredNorm()};
}

}  // namespace sdridge
