#pragma once

// One-shot GCV tuning of the SD mixing weight: no grid over xi, no refits, no held-out data.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "sdridge/ridge.hpp"
#include "sdridge/structural.hpp"

namespace sdridge {

struct GcvResiduals {
  VectorXd teacher;  // (y - H y) / (1 - tr(H)/n)
  VectorXd pd;       // (y - H^2 y) / (1 - tr(H^2)/n)
  HatTraces traces;
};

/// GCV residuals of a (teacher, PD) smoother pair with traces df, df_pd. Shared by
/// one-shot tuning and the multi-round GCV risk source.
inline GcvResiduals gcv_residuals_from(const VectorXd& labels, const VectorXd& fitted, const VectorXd& pd_fitted,
                                       double df, double df_pd) {
  const double n = static_cast<double>(labels.size());
  constexpr double kMargin = 1e-10;
  if (!(df / n < 1.0 - kMargin) || !(df_pd / n < 1.0 - kMargin)) {
    throw CorrectionBlowupError("GCV correction diverges: df/n=" + std::to_string(df / n) +
                                ", df_pd/n=" + std::to_string(df_pd / n) + " (increase lambda)");
  }
  return {(labels - fitted) / (1.0 - df / n), (labels - pd_fitted) / (1.0 - df_pd / n), {df, df_pd}};
}

inline GcvResiduals gcv_residuals(const RidgeSolver& solver, double lambda) {
  const RidgeFit teacher = fit_ridge(solver, lambda);
  const RidgeFit pd = pd_refit(solver, teacher);
  const HatTraces tr = hat_traces(solver, lambda);
  return gcv_residuals_from(solver.response(), solver.design() * teacher.beta, solver.design() * pd.beta, tr.df,
                            tr.df_pd);
}

struct GcvEstimates {
  double lambda = 0.0;
  double r_hat = 0.0;
  double r_pd_hat = 0.0;
  double c_hat = 0.0;
  double d_hat = 0.0;
  double xi_hat = 0.0;
  double r_sd_hat = 0.0;
  double df = 0.0;
  double df_pd = 0.0;
  bool degenerate = false;
};

/// Plug-in estimates of (R, R_pd, C) from GCV residuals, then the closed-form optimum.
/// `stabilizer` is added to the D denominator (0 reproduces the plain estimator).
inline GcvEstimates one_shot_from(const GcvResiduals& res, double lambda, double stabilizer = 0.0) {
  if (!(stabilizer >= 0.0)) throw ParameterError("stabilizer must be nonnegative");
  const double n = static_cast<double>(res.teacher.size());
  GcvEstimates est;
  est.lambda = lambda;
  est.df = res.traces.df;
  est.df_pd = res.traces.df_pd;
  est.r_hat = res.teacher.squaredNorm() / n;
  est.r_pd_hat = res.pd.squaredNorm() / n;
  est.c_hat = res.teacher.dot(res.pd) / n;
  est.d_hat = (res.teacher - res.pd).squaredNorm() / n;
  const double denom = est.d_hat + stabilizer;
  if (!(denom > 1e-12 * std::max(est.r_hat, 1.0))) {
    est.degenerate = true;
    est.xi_hat = 0.0;
    est.r_sd_hat = est.r_hat;
    return est;
  }
  const double num = est.r_hat - est.c_hat;
  est.xi_hat = num / denom;
  est.r_sd_hat = est.r_hat - num * num / denom;
  return est;
}

inline GcvEstimates one_shot(const RidgeSolver& solver, double lambda, double stabilizer = 0.0) {
  return one_shot_from(gcv_residuals(solver, lambda), lambda, stabilizer);
}

inline GcvEstimates one_shot(const Dataset& data, double lambda, double stabilizer = 0.0) {
  return one_shot(RidgeSolver(data), lambda, stabilizer);
}

}  // namespace sdridge
