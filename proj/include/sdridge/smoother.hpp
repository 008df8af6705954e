#pragma once

// Linear-smoother ridge families: ordinary, generalized (Tikhonov) and kernel ridge.
//
// Each family maps labels to fitted values through a smoother S_lambda that does not
// depend on the labels, so the pure-distilled refit is S_lambda^2 y and the tangent
// identity f - f_pd = -lambda d/dlambda f holds in closed form.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "sdridge/dataset.hpp"
#include "sdridge/errors.hpp"
#include "sdridge/ridge.hpp"

namespace sdridge {

template <class F>
concept LinearSmoother = requires(const F& f, const VectorXd& labels, double lambda,
                                  const RidgeFit& fit, const MatrixXd& xq) {
  { f.kind() } -> std::same_as<SmootherKind>;
  { f.n() } -> std::convertible_to<Eigen::Index>;
  { f.labels() } -> std::convertible_to<const VectorXd&>;
  { f.fit(labels, lambda) } -> std::same_as<RidgeFit>;
  { f.fitted(fit) } -> std::same_as<VectorXd>;
  { f.predict(fit, xq) } -> std::same_as<VectorXd>;
  { f.pd_refit(fit) } -> std::same_as<RidgeFit>;
  { f.lambda_derivative(fit) } -> std::same_as<VectorXd>;
  { f.hat_traces(lambda) } -> std::same_as<HatTraces>;
};

/// Ordinary ridge as a smoother; shares the eigendecomposition of RidgeSolver.
class OrdinaryRidge {
 public:
  explicit OrdinaryRidge(const Dataset& data) : solver_(std::make_shared<RidgeSolver>(data)) {}
  explicit OrdinaryRidge(std::shared_ptr<const RidgeSolver> solver) : solver_(std::move(solver)) {}

  [[nodiscard]] SmootherKind kind() const { return SmootherKind::ordinary; }
  [[nodiscard]] Eigen::Index n() const { return solver_->n(); }
  [[nodiscard]] const VectorXd& labels() const { return solver_->response(); }
  [[nodiscard]] const RidgeSolver& solver() const { return *solver_; }

  [[nodiscard]] RidgeFit fit(const VectorXd& y, double lambda) const { return fit_ridge(*solver_, y, lambda); }
  [[nodiscard]] VectorXd fitted(const RidgeFit& f) const { return solver_->design() * f.beta; }
  [[nodiscard]] VectorXd predict(const RidgeFit& f, const MatrixXd& xq) const {
    if (xq.cols() != solver_->p()) throw DataError("query dimension mismatch");
    return xq * f.beta;
  }
  [[nodiscard]] RidgeFit pd_refit(const RidgeFit& f) const { return sdridge::pd_refit(*solver_, f); }
  [[nodiscard]] VectorXd lambda_derivative(const RidgeFit& f) const {
    return sdridge::lambda_derivative(*solver_, f);
  }
  [[nodiscard]] HatTraces hat_traces(double lambda) const { return sdridge::hat_traces(*solver_, lambda); }

 private:
  std::shared_ptr<const RidgeSolver> solver_;
};

/// Generalized ridge: argmin ||y - X b||^2 / n + lambda b^T Omega b, Omega symmetric positive definite.
///
/// Solved by a Cholesky factorization of X^T X + n lambda Omega per lambda (Omega need not
/// commute with X^T X).
class GeneralizedRidge {
 public:
  GeneralizedRidge(const Dataset& data, MatrixXd omega)
      : X_(data.X), y_(data.y), omega_(std::move(omega)), gram_(data.X.transpose() * data.X) {
    data.validate();
    if (omega_.rows() != X_.cols() || omega_.cols() != X_.cols()) {
      throw ParameterError("penalty matrix must be p x p");
    }
    if (!omega_.allFinite()) throw ParameterError("penalty matrix has non-finite entries");
    const double scale = std::max(1.0, omega_.cwiseAbs().maxCoeff());
    if ((omega_ - omega_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ParameterError("penalty matrix must be symmetric");
    }
    Eigen::LLT<MatrixXd> llt(omega_);
    if (llt.info() != Eigen::Success) throw ParameterError("penalty matrix must be positive definite");
  }

  [[nodiscard]] SmootherKind kind() const { return SmootherKind::generalized; }
  [[nodiscard]] Eigen::Index n() const { return X_.rows(); }
  [[nodiscard]] const VectorXd& labels() const { return y_; }
  [[nodiscard]] const MatrixXd& omega() const { return omega_; }

  [[nodiscard]] RidgeFit fit(const VectorXd& y, double lambda) const {
    if (y.size() != n()) throw DataError("label vector length does not match design rows");
    const auto llt = factor(lambda);
    return {lambda, llt.solve(X_.transpose() * y), SmootherKind::generalized};
  }
  [[nodiscard]] VectorXd fitted(const RidgeFit& f) const { return X_ * f.beta; }
  [[nodiscard]] VectorXd predict(const RidgeFit& f, const MatrixXd& xq) const {
    if (xq.cols() != X_.cols()) throw DataError("query dimension mismatch");
    return xq * f.beta;
  }
  [[nodiscard]] RidgeFit pd_refit(const RidgeFit& f) const { return fit(fitted(f), f.lambda); }

  /// -n A^{-1} Omega A^{-1} X^T y with A = X^T X + n lambda Omega.
  [[nodiscard]] VectorXd lambda_derivative(const RidgeFit& f) const {
    const auto llt = factor(f.lambda);
    return -static_cast<double>(n()) * llt.solve(omega_ * f.beta);
  }

  [[nodiscard]] HatTraces hat_traces(double lambda) const {
    const auto llt = factor(lambda);
    const MatrixXd m = llt.solve(gram_);  // A^{-1} X^T X, similar to S
    return {m.trace(), (m * m).trace()};
  }

 private:
  [[nodiscard]] Eigen::LLT<MatrixXd> factor(double lambda) const {
    require_positive_lambda(lambda);
    Eigen::LLT<MatrixXd> llt(gram_ + static_cast<double>(n()) * lambda * omega_);
    if (llt.info() != Eigen::Success) throw NumericError("Cholesky of X^T X + n lambda Omega failed");
    return llt;
  }

  MatrixXd X_;
  VectorXd y_;
  MatrixXd omega_;
  MatrixXd gram_;
};

/// Squared Euclidean distances between the rows of a and the rows of b.
inline MatrixXd pairwise_sq_distances(const MatrixXd& a, const MatrixXd& b) {
  const VectorXd an = a.rowwise().squaredNorm();
  const VectorXd bn = b.rowwise().squaredNorm();
  MatrixXd d = -2.0 * a * b.transpose();
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(0.0);
}

/// Median of the pairwise l2 distances between distinct training rows.
inline double median_bandwidth(const MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw DataError("median bandwidth needs at least two rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).norm());
  }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  if (!(med > 0.0)) throw DataError("median pairwise distance is zero");
  return med;
}

/// Gaussian kernel ridge, k(x, x') = exp(-||x - x'||^2 / (2 h^2)), fit (K + n lambda I)^{-1} y.
///
/// K is eigendecomposed once. A diagonal jitter is added when roundoff makes K indefinite
/// beyond 1e-10 tr(K) / n.
class KernelRidge {
 public:
  static constexpr std::size_t kMaxRows = 10000;

  KernelRidge(const Dataset& data, double bandwidth) : X_(data.X), y_(data.y), h_(bandwidth) {
    data.validate();
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ParameterError("bandwidth must be positive");
    if (static_cast<std::size_t>(X_.rows()) > kMaxRows) throw ParameterError("kernel ridge is capped at 10^4 rows");
    MatrixXd k = kernel(X_);
    const double n = static_cast<double>(X_.rows());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of kernel matrix failed");
    const double floor = 1e-10 * k.trace() / n;
    evals_ = es.eigenvalues();
    if (evals_.minCoeff() < -floor) {
      jitter_ = -evals_.minCoeff() + floor;
      evals_.array() += jitter_;
    }
    evecs_ = es.eigenvectors();
  }

  /// Bandwidth set to the median pairwise distance of the training covariates.
  static KernelRidge with_median_bandwidth(const Dataset& data) {
    return KernelRidge(data, median_bandwidth(data.X));
  }

  [[nodiscard]] SmootherKind kind() const { return SmootherKind::kernel; }
  [[nodiscard]] Eigen::Index n() const { return X_.rows(); }
  [[nodiscard]] const VectorXd& labels() const { return y_; }
  [[nodiscard]] double bandwidth() const { return h_; }
  [[nodiscard]] double jitter() const { return jitter_; }

  [[nodiscard]] MatrixXd kernel(const MatrixXd& xq) const {
    return (-pairwise_sq_distances(xq, X_) / (2.0 * h_ * h_)).array().exp().matrix();
  }

  /// Dual weights (K + n lambda I)^{-1} y.
  [[nodiscard]] RidgeFit fit(const VectorXd& y, double lambda) const {
    if (y.size() != n()) throw DataError("label vector length does not match design rows");
    return {lambda, apply_inverse(y, lambda, 1), SmootherKind::kernel};
  }
  [[nodiscard]] VectorXd fitted(const RidgeFit& f) const {
    return evecs_ * (evals_.array() * (evecs_.transpose() * f.beta).array()).matrix();
  }
  [[nodiscard]] VectorXd predict(const RidgeFit& f, const MatrixXd& xq) const {
    if (xq.cols() != X_.cols()) throw DataError("query dimension mismatch");
    return kernel(xq) * f.beta;
  }
  [[nodiscard]] RidgeFit pd_refit(const RidgeFit& f) const { return fit(fitted(f), f.lambda); }

  /// d alpha / d lambda = -n (K + n lambda I)^{-1} alpha.
  [[nodiscard]] VectorXd lambda_derivative(const RidgeFit& f) const {
    return -static_cast<double>(n()) * apply_inverse(f.beta, f.lambda, 1);
  }

  [[nodiscard]] HatTraces hat_traces(double lambda) const {
    require_positive_lambda(lambda);
    const double nl = static_cast<double>(n()) * lambda;
    const Eigen::ArrayXd h = evals_.array().max(0.0) / (evals_.array().max(0.0) + nl);
    return {h.sum(), h.square().sum()};
  }

 private:
  [[nodiscard]] VectorXd apply_inverse(const VectorXd& v, double lambda, int power) const {
    require_positive_lambda(lambda);
    const double nl = static_cast<double>(n()) * lambda;
    const Eigen::ArrayXd d = (evals_.array() + nl).pow(-power);
    return evecs_ * (d * (evecs_.transpose() * v).array()).matrix();
  }

  MatrixXd X_;
  VectorXd y_;
  double h_;
  double jitter_ = 0.0;
  VectorXd evals_;
  MatrixXd evecs_;
};

static_assert(LinearSmoother<OrdinaryRidge>);
static_assert(LinearSmoother<GeneralizedRidge>);
static_assert(LinearSmoother<KernelRidge>);

/// Residual f - f_pd + lambda df/dlambda of the tangent identity on query points.
template <LinearSmoother F>
VectorXd tangent_residual(const F& family, double lambda, const MatrixXd& xq) {
  const RidgeFit teacher = family.fit(family.labels(), lambda);
  const RidgeFit pd = family.pd_refit(teacher);
  RidgeFit deriv = teacher;
  deriv.beta = family.lambda_derivative(teacher);
  return family.predict(teacher, xq) - family.predict(pd, xq) + lambda * family.predict(deriv, xq);
}

}  // namespace sdridge
