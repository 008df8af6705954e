#pragma once

// Proportional-asymptotics deterministic equivalents for ridge and optimal SD risks.
//
// The effective regularization kappa solves kappa = lambda + gamma kappa tr(Sigma (Sigma + kappa)^{-1}) / p.
// Risk limits are rational functions of kappa and the trace / alignment functionals
//   t_k = gamma tr(Sigma^2 G^k) / p,   q_k = beta^T G^k Sigma beta,   G = (Sigma + kappa I)^{-1}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "sdridge/errors.hpp"
#include "sdridge/ridge.hpp"
#include "sdridge/structural.hpp"

namespace sdridge {

/// Population spectrum: eigenvalues of Sigma and beta expressed in Sigma's eigenbasis.
struct SpectralModel {
  VectorXd sigma_eigs;
  VectorXd beta_proj;
  double noise_var = 1.0;
  double gamma = 1.0;

  SpectralModel() = default;
  SpectralModel(VectorXd eigs, VectorXd proj, double noise, double aspect)
      : sigma_eigs(std::move(eigs)), beta_proj(std::move(proj)), noise_var(noise), gamma(aspect) {
    validate();
  }

  /// Eigendecomposes a dense (Sigma, beta) pair.
  static SpectralModel from_dense(const MatrixXd& sigma, const VectorXd& beta, double noise, double aspect) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != beta.size()) {
      throw DataError("covariance and signal dimensions disagree");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition of Sigma failed");
    return {es.eigenvalues(), es.eigenvectors().transpose() * beta, noise, aspect};
  }

  /// Sigma = I with the deterministic surrogate beta = (r / sqrt(p)) 1 for an isotropic random signal.
  static SpectralModel isotropic(double r2, double noise, double aspect, Eigen::Index p = 1) {
    if (!(r2 >= 0.0)) throw ParameterError("signal energy must be nonnegative");
    return {VectorXd::Ones(p), VectorXd::Constant(p, std::sqrt(r2 / static_cast<double>(p))), noise, aspect};
  }

  [[nodiscard]] double signal_energy() const { return beta_proj.squaredNorm(); }

  void validate() const {
    if (sigma_eigs.size() < 1 || sigma_eigs.size() != beta_proj.size()) {
      throw DataError("spectral model needs matching nonempty eigenvalue and projection vectors");
    }
    if (!sigma_eigs.allFinite() || !beta_proj.allFinite()) throw DataError("spectral model has non-finite entries");
    if (!(sigma_eigs.minCoeff() > 0.0)) throw DataError("covariance eigenvalues must be positive");
    if (!(noise_var >= 0.0)) throw ParameterError("noise variance must be nonnegative");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("aspect ratio must be positive");
  }
};

/// Unique positive root of kappa - lambda - gamma kappa mean(s / (s + kappa)) = 0.
///
/// Newton on h(kappa) = 1 - lambda/kappa - gamma mean(s/(s+kappa)), which is strictly increasing,
/// safeguarded by bisection on [lambda, lambda + gamma max(s)].
inline double solve_kappa(const SpectralModel& model, double lambda) {
  require_positive_lambda(lambda);
  const Eigen::ArrayXd s = model.sigma_eigs.array();
  const double g = model.gamma;
  auto residual = [&](double k) { return k - lambda - g * k * (s / (s + k)).mean(); };
  auto h_and_slope = [&](double k) {
    const double h = 1.0 - lambda / k - g * (s / (s + k)).mean();
    const double dh = lambda / (k * k) + g * (s / (s + k).square()).mean();
    return std::pair{h, dh};
  };

  double lo = lambda;
  double hi = lambda + g * s.maxCoeff();
  double k = 0.5 * (lo + hi);
  constexpr int kMaxIter = 200;
  for (int it = 0; it < kMaxIter; ++it) {
    if (std::abs(residual(k)) <= 1e-14 * k) return k;
    const auto [h, dh] = h_and_slope(k);
    if (h < 0.0) lo = k; else hi = k;
    double next = k - h / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      k = next;
      break;
    }
    k = next;
  }
  if (std::abs(residual(k)) > 1e-12 * k) {
    throw NumericError("kappa fixed point did not converge: lambda=" + std::to_string(lambda) +
                       " kappa=" + std::to_string(k) + " residual=" + std::to_string(residual(k)));
  }
  return k;
}

struct AsymptoticState {
  double lambda = 0.0;
  double kappa = 0.0;
  double b = 0.0;  // kappa'(lambda) = 1 / (1 - t2)
  double t2 = 0.0, t3 = 0.0, t4 = 0.0;
  double q2 = 0.0, q3 = 0.0, q4 = 0.0;
  double u2 = 0.0, u3 = 0.0, u4 = 0.0;
  double E = 0.0;
  double a2 = 0.0, a3 = 0.0, a4 = 0.0;
  // Cancellation-free pieces used for R - C and D.
  double q2_minus_kappa_q3 = 0.0;  // sum beta_i^2 s_i^2 / (s_i + kappa)^3
  double bias_square = 0.0;        // sum beta_i^2 s_i/(s_i+kappa)^2 (s_i/(s_i+kappa) - b kappa t3)^2
};

inline AsymptoticState functionals(const SpectralModel& model, double kappa, double lambda) {
  require_positive_lambda(lambda);
  if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
  const Eigen::ArrayXd s = model.sigma_eigs.array();
  const Eigen::ArrayXd w = model.beta_proj.array().square();
  const Eigen::ArrayXd g1 = 1.0 / (s + kappa);
  const double gam = model.gamma;

  AsymptoticState st;
  st.lambda = lambda;
  st.kappa = kappa;
  st.t2 = gam * (s.square() * g1.pow(2)).mean();
  st.t3 = gam * (s.square() * g1.pow(3)).mean();
  st.t4 = gam * (s.square() * g1.pow(4)).mean();
  st.q2 = (w * s * g1.pow(2)).sum();
  st.q3 = (w * s * g1.pow(3)).sum();
  st.q4 = (w * s * g1.pow(4)).sum();
  if (!(st.t2 < 1.0)) throw NumericError("t2 >= 1: kappa is not a valid fixed point");
  const double b = 1.0 / (1.0 - st.t2);
  st.b = b;
  st.u2 = st.t2 * b;
  st.u3 = st.t3 * std::pow(b, 3);
  st.u4 = st.t4 * std::pow(b, 4) + 2.0 * st.t3 * st.t3 * std::pow(b, 5);
  st.E = kappa - b * lambda + b * b * kappa * lambda * st.t3;
  const double kl2 = kappa * kappa * lambda * lambda;
  st.a2 = b * st.E * st.E + std::pow(b, 4) * kl2 * st.t4 + std::pow(b, 5) * kl2 * st.t3 * st.t3;
  st.a3 = 2.0 * b * b * kappa * lambda * st.E;
  st.a4 = std::pow(b, 3) * kl2;
  st.q2_minus_kappa_q3 = (w * s.square() * g1.pow(3)).sum();
  st.bias_square = (w * s * g1.square() * (s * g1 - b * kappa * st.t3).square()).sum();
  return st;
}

inline AsymptoticState solve_state(const SpectralModel& model, double lambda) {
  return functionals(model, solve_kappa(model, lambda), lambda);
}

struct TheoreticalRisks {
  double r_teacher = 0.0;
  double c_cross = 0.0;
  double r_pd = 0.0;
  double d_gap = 0.0;
  double xi_star = 0.0;
  double r_sd_star = 0.0;
  bool degenerate = false;
};

/// Limits of R, C and R_pd, and the optimal SD weight and risk built from them.
///
/// R, C, R_pd follow the displayed limit formulas term by term. R - C and D are evaluated
/// from algebraically identical forms that factor out lambda and are sums of nonnegative
/// terms, since the raw differences cancel catastrophically at large lambda.
inline TheoreticalRisks theoretical_risks(const AsymptoticState& st, const SpectralModel& model) {
  const double k = st.kappa, b = st.b, lam = st.lambda, s2 = model.noise_var;
  TheoreticalRisks out;
  out.r_teacher = k * k * b * st.q2 + s2 * st.u2 + s2;
  out.c_cross = 2.0 * k * k * b * st.q2 - (k * b * st.E * st.q2 + k * k * b * b * lam * st.q3) +
                s2 * (st.u2 - lam * st.u3) + s2;
  out.r_pd = 4.0 * k * k * b * st.q2 - 2.0 * (2.0 * k * b * st.E * st.q2 + 2.0 * k * k * b * b * lam * st.q3) +
             (st.a2 * st.q2 + st.a3 * st.q3 + st.a4 * st.q4) + s2 * (st.u2 - 2.0 * lam * st.u3 + lam * lam * st.u4) +
             s2;

  // R - C = lam * a and D = lam^2 * d. Both are sums of nonnegative terms with no cancellation,
  // so d is trusted down to exact zero; an absolute threshold on D would wrongly flag both
  // lambda -> 0 (D ~ lambda^2) and lambda -> infinity (D ~ lambda^-2) as degenerate.
  const double a = -k * b * b * st.q2_minus_kappa_q3 + k * k * std::pow(b, 3) * st.t3 * st.q2 + s2 * st.u3;
  const double d = std::pow(b, 3) * st.bias_square + std::pow(b, 4) * k * k * st.q2 * (st.t4 + b * st.t3 * st.t3) +
                   s2 * st.u4;
  out.d_gap = lam * lam * d;
  if (!(d > 0.0) || !std::isfinite(a / d)) {
    out.degenerate = true;
    out.xi_star = 0.0;
    out.r_sd_star = out.r_teacher;
    return out;
  }
  out.xi_star = a / (lam * d);
  out.r_sd_star = std::min(out.r_teacher - a * a / d, out.r_teacher);
  return out;
}

inline TheoreticalRisks theoretical_risks(const SpectralModel& model, double lambda) {
  return theoretical_risks(solve_state(model, lambda), model);
}

struct IsotropicForms {
  double kappa = 0.0;
  double v = 0.0;  // companion Stieltjes transform, 1 / kappa
  double b = 0.0;  // kappa'(lambda)
};

/// Sigma = I: kappa = ((lambda + gamma - 1) + sqrt((lambda + gamma - 1)^2 + 4 lambda)) / 2.
inline IsotropicForms isotropic_closed_forms(double gamma, double lambda) {
  require_positive_lambda(lambda);
  if (!(gamma > 0.0)) throw ParameterError("aspect ratio must be positive");
  const double a = lambda + gamma - 1.0;
  const double root = std::sqrt(a * a + 4.0 * lambda);
  // pick the branch without cancellation; (root - a)(root + a) = 4 lambda
  const double kappa = a >= 0.0 ? 0.5 * (a + root) : 2.0 * lambda / (root - a);
  const double b = 0.5 * (1.0 + (lambda + gamma + 1.0) / root);
  return {kappa, 1.0 / kappa, b};
}

/// Ridge-optimal (Bayes) risk for Sigma = I with r^2 = snr * sigma^2.
inline double ridge_optimal_risk_isotropic(double snr, double gamma, double noise_var) {
  if (!(snr >= 0.0) || !(gamma > 0.0) || !(noise_var > 0.0)) throw ParameterError("positive inputs required");
  const double r2 = snr * noise_var;
  const double t = gamma * noise_var - r2 * (gamma - 1.0);
  return noise_var + (-gamma * noise_var + r2 * (gamma - 1.0) +
                      std::sqrt(4.0 * gamma * gamma * r2 * noise_var + t * t)) /
                         (2.0 * gamma);
}

struct ExtremeLimits {
  double gap_zero = std::numeric_limits<double>::quiet_NaN();  // lambda -> 0, NaN when gamma == 1
  double gap_inf = 0.0;                                        // lambda -> infinity
  double s_star = 0.0;                                         // R* / sigma^2 - 1
};

inline double s_star(double snr, double gamma) {
  const double t = snr * (gamma - 1.0) - gamma;
  return (t + std::sqrt(4.0 * snr * gamma * gamma + t * t)) / (2.0 * gamma);
}

inline double gap_at_zero(double snr, double gamma) {
  if (!(gamma > 0.0) || gamma == 1.0) throw DomainError("the lambda -> 0 limit is cased on gamma < 1 or gamma > 1");
  const double ss = s_star(snr, gamma);
  if (gamma < 1.0) {
    const double om = 1.0 - gamma;
    return (snr * om * om + gamma) / ((snr * om * om * om + gamma * (1.0 - gamma * gamma)) * (ss + 1.0)) - 1.0;
  }
  const double gm = gamma - 1.0;
  const double num = snr * snr * std::pow(gm, 4) + snr * gamma * (2.0 * gamma + 1.0) * gm * gm + std::pow(gamma, 4);
  const double den = snr * gamma * std::pow(gm, 3) + gamma * gamma * (gamma * gamma - 1.0);
  return num / (den * (ss + 1.0)) - 1.0;
}

inline double gap_at_infinity(double snr, double gamma) {
  const double ss = s_star(snr, gamma);
  return (snr * snr * gamma + snr * (2.0 * gamma + 1.0) + gamma) / ((snr * (gamma + 1.0) + gamma) * (ss + 1.0)) - 1.0;
}

/// Relative suboptimality (R_sd*(lambda) - R*) / R* of optimal SD at extreme regularization.
inline ExtremeLimits extreme_limits(double snr, double gamma) {
  if (!(snr > 0.0) || !(gamma > 0.0)) throw ParameterError("snr and gamma must be positive");
  ExtremeLimits out;
  out.s_star = s_star(snr, gamma);
  out.gap_inf = gap_at_infinity(snr, gamma);
  if (gamma != 1.0) out.gap_zero = gap_at_zero(snr, gamma);
  return out;
}

struct MpMoments {
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
};

/// E[X^-k], k = 1, 2, 3, for X ~ Marchenko-Pastur(gamma), gamma < 1.
inline MpMoments mp_negative_moments(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw DomainError("negative MP moments need 0 < gamma < 1");
  const double om = 1.0 - gamma;
  return {1.0 / om, 1.0 / std::pow(om, 3), (1.0 + gamma) / std::pow(om, 5)};
}

struct FreshLimits {
  double s = 0.0;   // lim tr(M) / p
  double s2 = 0.0;  // lim tr(M^2) / p
  double r_teacher = 0.0;
  double c_fr = 0.0;
  double r_pd_fr = 0.0;
  double d_fr = 0.0;
  double xi_fr_star = 0.0;
  double r_sd_fr_star = 0.0;
};

/// Isotropic limits of the fresh-X affine family (1 - xi) f + xi f_pd^fr with m, n ~ p / gamma.
inline FreshLimits freshx_isotropic_limits(double snr, double gamma, double noise_var, double lambda) {
  if (!(snr > 0.0) || !(gamma > 0.0) || !(noise_var > 0.0)) throw ParameterError("positive inputs required");
  const IsotropicForms iso = isotropic_closed_forms(gamma, lambda);
  const double r2 = snr * noise_var;
  const double lv = lambda * iso.v;
  FreshLimits out;
  out.s = (1.0 - lv) / gamma;
  out.s2 = (1.0 - 2.0 * lv + lambda * lambda * iso.b * iso.v * iso.v) / gamma;
  const SpectralModel model = SpectralModel::isotropic(r2, noise_var, gamma);
  out.r_teacher = theoretical_risks(model, lambda).r_teacher;
  const double excess = out.r_teacher - noise_var;
  const double s = out.s, s2 = out.s2;
  out.c_fr = noise_var + s * excess + r2 * (1.0 - s) * (1.0 - s);
  out.r_pd_fr = noise_var + s2 * excess + r2 * (1.0 - 2.0 * s * s + (2.0 * s - 1.0) * s2);
  // direct forms of R - C and D: (1-s)(excess - r2 (1-s)) and (1 - 2s + s2)(excess + r2 (2s - 1))
  const double gap_num = (1.0 - s) * (excess - r2 * (1.0 - s));
  out.d_fr = std::max((1.0 - 2.0 * s + s2) * (excess + r2 * (2.0 * s - 1.0)), 0.0);
  const RiskComponents rc{out.r_teacher, out.r_pd_fr, out.c_fr, out.d_fr};
  if (!(out.d_fr > degeneracy_threshold(rc))) {
    out.xi_fr_star = 0.0;
    out.r_sd_fr_star = out.r_teacher;
  } else {
    out.xi_fr_star = gap_num / out.d_fr;
    out.r_sd_fr_star = std::min(out.r_teacher - gap_num * gap_num / out.d_fr, out.r_teacher);
  }
  return out;
}

/// n log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("log grid needs 0 < min <= max");
  if (points < 1) throw ParameterError("log grid needs at least one point");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// Grid with the given number of points per decade between lo and hi.
inline std::vector<double> log_grid_per_decade(double lo, double hi, std::size_t per_decade = 60) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ParameterError("log grid needs 0 < min <= max");
  const auto pts = static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * static_cast<double>(per_decade))) + 1;
  return log_grid(lo, hi, pts);
}

}  // namespace sdridge
