#pragma once

// Synthetic Gaussian/Rademacher linear-model experiments comparing empirical SD quantities
// with their deterministic equivalents.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sdridge/asymptotics.hpp"
#include "sdridge/errors.hpp"
#include "sdridge/format.hpp"
#include "sdridge/parallel.hpp"
#include "sdridge/ridge.hpp"
#include "sdridge/structural.hpp"
#include "sdridge/tuning.hpp"

namespace sdridge {

using Rng = std::mt19937_64;

struct CovarianceSpec {
  enum class Kind { isotropic, ar1, spiked };
  Kind kind = Kind::isotropic;
  Eigen::Index p = 1;
  double rho = 0.0;               // ar1
  double strength = 5.0;          // spiked: Sigma = I + strength v v^T, |v| = 1
  std::uint64_t spike_seed = 0;   // spiked: seed of the Gaussian draw of v

  void validate() const {
    if (p < 1) throw ParameterError("covariance dimension must be positive");
    if (kind == Kind::ar1 && !(std::abs(rho) < 1.0)) throw ParameterError("ar1 needs |rho| < 1");
    if (kind == Kind::spiked && !(strength >= 0.0)) throw ParameterError("spike strength must be nonnegative");
  }
};

/// Sigma with eigenvalues sorted descending.
struct CovarianceEigen {
  VectorXd eigenvalues;
  MatrixXd eigenvectors;

  [[nodiscard]] MatrixXd matrix() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
  [[nodiscard]] MatrixXd sqrt_matrix() const {
    return eigenvectors * eigenvalues.cwiseMax(0.0).cwiseSqrt().asDiagonal() * eigenvectors.transpose();
  }
};

inline MatrixXd covariance_matrix(const CovarianceSpec& spec) {
  spec.validate();
  const Eigen::Index p = spec.p;
  switch (spec.kind) {
    case CovarianceSpec::Kind::isotropic:
      return MatrixXd::Identity(p, p);
    case CovarianceSpec::Kind::ar1: {
      MatrixXd s(p, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) s(i, j) = std::pow(spec.rho, static_cast<double>(std::abs(i - j)));
      }
      return s;
    }
    case CovarianceSpec::Kind::spiked: {
      Rng rng(stream_seed(spec.spike_seed, 0));
      std::normal_distribution<double> normal;
      VectorXd v(p);
      for (Eigen::Index i = 0; i < p; ++i) v(i) = normal(rng);
      v.normalize();
      return MatrixXd::Identity(p, p) + spec.strength * v * v.transpose();
    }
  }
  throw ParameterError("unknown covariance kind");
}

inline CovarianceEigen gen_covariance(const CovarianceSpec& spec) {
  const MatrixXd s = covariance_matrix(spec);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

struct SignalSpec {
  enum class Kind { isotropic, top_aligned, bottom_aligned };
  Kind kind = Kind::isotropic;
  double ratio_pct = 100.0;
  double factor = 1.0;
  double r2 = 1.0;

  void validate() const {
    if (!(r2 > 0.0) || !std::isfinite(r2)) throw ParameterError("signal energy r2 must be positive");
    if (kind != Kind::isotropic) {
      if (!(ratio_pct > 0.0 && ratio_pct <= 100.0)) throw ParameterError("alignment ratio must be in (0, 100]");
      if (!(factor >= 0.0 && factor <= 1.0)) throw ParameterError("alignment factor must be in [0, 1]");
    }
  }
};

/// Fraction of E|beta|^2 placed on each eigendirection (descending eigenvalue order); sums to 1.
inline VectorXd signal_weights(const SignalSpec& spec, Eigen::Index p) {
  spec.validate();
  const double dp = static_cast<double>(p);
  if (spec.kind == SignalSpec::Kind::isotropic) return VectorXd::Constant(p, 1.0 / dp);
  const auto k = static_cast<Eigen::Index>(std::llround(spec.ratio_pct / 100.0 * dp));
  if (k < 1) throw ParameterError("alignment ratio selects no eigendirections for p=" + std::to_string(p));
  if (k >= p) return VectorXd::Constant(p, 1.0 / dp);
  VectorXd w = VectorXd::Constant(p, (1.0 - spec.factor) / static_cast<double>(p - k));
  const Eigen::Index start = spec.kind == SignalSpec::Kind::top_aligned ? 0 : p - k;
  w.segment(start, k).setConstant(spec.factor / static_cast<double>(k));
  return w;
}

/// beta = V diag(sqrt(r2 w)) z with z standard Gaussian, so E|beta|^2 = r2.
inline VectorXd gen_signal(const SignalSpec& spec, const CovarianceEigen& cov, Rng& rng) {
  const Eigen::Index p = cov.eigenvalues.size();
  const VectorXd scale = (spec.r2 * signal_weights(spec, p)).cwiseSqrt();
  std::normal_distribution<double> normal;
  VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z(i) = normal(rng);
  return cov.eigenvectors * scale.cwiseProduct(z);
}

enum class EntryDist { gaussian, rademacher };

struct SimConfig {
  Eigen::Index n = 400;
  Eigen::Index p = 200;
  CovarianceSpec cov;
  SignalSpec sig;
  double noise_var = 1.0;
  std::vector<double> lambda_grid;
  std::size_t reps = 30;
  std::uint64_t seed = 0;
  EntryDist entry_dist = EntryDist::gaussian;

  void validate() const {
    if (n < 2 || p < 1) throw ParameterError("simulation needs n >= 2 and p >= 1");
    if (cov.p != p) throw ParameterError("covariance dimension differs from p");
    cov.validate();
    sig.validate();
    if (!(noise_var >= 0.0)) throw ParameterError("noise variance must be nonnegative");
    if (reps < 1) throw ParameterError("reps must be at least 1");
    if (lambda_grid.empty()) throw ParameterError("empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      require_positive_lambda(lambda_grid[i]);
      if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) throw ParameterError("lambda grid must be ascending");
    }
  }
};

/// Per-(rep, lambda) quantities. Oracle risks use the known (Sigma, beta); the hat
/// quantities are the GCV one-shot estimates from training data only.
enum class SimMetric : std::size_t { r, r_pd, c, d, xi_star, r_sd_star, xi_hat, r_sd_hat, count };

inline constexpr std::array<const char*, static_cast<std::size_t>(SimMetric::count)> kSimMetricNames{
    "R", "R_pd", "C", "D", "xi_star", "R_sd_star", "xi_hat", "R_sd_hat"};

using SimCell = std::array<double, static_cast<std::size_t>(SimMetric::count)>;

inline SimCell nan_cell() {
  SimCell c;
  c.fill(std::numeric_limits<double>::quiet_NaN());
  return c;
}

struct MetricSummary {
  std::vector<double> mean, std, sem;  // std: across reps; sem: std / sqrt(count)
  std::vector<std::size_t> count;
};

struct SimResult {
  SimConfig config;
  std::vector<std::vector<SimCell>> cells;  // [rep][lambda]
  std::vector<SimCell> theory;              // [lambda]; xi_hat/R_sd_hat carry the oracle limits
  std::vector<std::string> rep_errors;      // empty string when the rep succeeded

  [[nodiscard]] double value(std::size_t rep, std::size_t li, SimMetric m) const {
    return cells[rep][li][static_cast<std::size_t>(m)];
  }
  [[nodiscard]] double theory_value(std::size_t li, SimMetric m) const {
    return theory[li][static_cast<std::size_t>(m)];
  }

  /// NaN entries (failed reps or GCV blowups) are skipped.
  [[nodiscard]] MetricSummary summary(SimMetric m) const {
    const std::size_t L = config.lambda_grid.size();
    MetricSummary s{std::vector<double>(L), std::vector<double>(L), std::vector<double>(L),
                    std::vector<std::size_t>(L)};
    for (std::size_t li = 0; li < L; ++li) {
      double sum = 0.0;
      std::size_t cnt = 0;
      for (const auto& rep : cells) {
        const double v = rep[li][static_cast<std::size_t>(m)];
        if (std::isnan(v)) continue;
        sum += v;
        ++cnt;
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.count[li] = cnt;
      s.mean[li] = cnt > 0 ? sum / static_cast<double>(cnt) : nan;
      double ss = 0.0;
      for (const auto& rep : cells) {
        const double v = rep[li][static_cast<std::size_t>(m)];
        if (!std::isnan(v)) ss += (v - s.mean[li]) * (v - s.mean[li]);
      }
      s.std[li] = cnt > 1 ? std::sqrt(ss / static_cast<double>(cnt - 1)) : nan;
      s.sem[li] = cnt > 1 ? s.std[li] / std::sqrt(static_cast<double>(cnt)) : nan;
    }
    return s;
  }
};

/// Theory model with beta replaced by its second-moment surrogate beta_proj^2 = r2 w.
/// The limits are linear in beta_proj^2, so this equals their expectation over the signal draw.
inline SpectralModel simulation_model(const SimConfig& cfg, const CovarianceEigen& cov) {
  const VectorXd proj = (cfg.sig.r2 * signal_weights(cfg.sig, cfg.p)).cwiseSqrt();
  return {cov.eigenvalues.cwiseMax(1e-300), proj, cfg.noise_var,
          static_cast<double>(cfg.p) / static_cast<double>(cfg.n)};
}

inline MatrixXd draw_entries(Eigen::Index rows, Eigen::Index cols, EntryDist dist, Rng& rng) {
  MatrixXd z(rows, cols);
  if (dist == EntryDist::gaussian) {
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = normal(rng);
  } else {
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = coin(rng) ? 1.0 : -1.0;
  }
  return z;
}

/// One synthetic draw (X, beta, y) from the configured model.
struct SimDraw {
  MatrixXd x;
  VectorXd beta;
  VectorXd y;
};

inline SimDraw draw_instance(const SimConfig& cfg, const CovarianceEigen& cov, const MatrixXd& sigma_sqrt,
                             Rng& rng) {
  SimDraw d;
  d.x = draw_entries(cfg.n, cfg.p, cfg.entry_dist, rng) * sigma_sqrt;
  d.beta = gen_signal(cfg.sig, cov, rng);
  std::normal_distribution<double> normal(0.0, std::sqrt(cfg.noise_var));
  VectorXd eps(cfg.n);
  for (Eigen::Index i = 0; i < cfg.n; ++i) eps(i) = normal(rng);
  d.y = d.x * d.beta + eps;
  return d;
}

inline std::vector<SimCell> simulate_rep(const SimConfig& cfg, const CovarianceEigen& cov, const MatrixXd& sigma,
                                         const MatrixXd& sigma_sqrt, std::size_t rep) {
  Rng rng(stream_seed(cfg.seed, rep));
  const SimDraw d = draw_instance(cfg, cov, sigma_sqrt, rng);
  const RidgeSolver solver(Dataset(d.x, d.y));
  const Population pop(sigma, d.beta, cfg.noise_var);
  std::vector<SimCell> out;
  out.reserve(cfg.lambda_grid.size());
  for (double lam : cfg.lambda_grid) {
    SimCell c = nan_cell();
    const RidgeFit t = fit_ridge(solver, lam);
    const RidgeFit pd = pd_refit(solver, t);
    const RiskComponents rc = risk_components_oracle(t.beta, pd.beta, pop);
    const MixResult mix = optimal_mix(rc);
    c[0] = rc.r_teacher;
    c[1] = rc.r_pd;
    c[2] = rc.c_cross;
    c[3] = rc.d_gap;
    c[4] = mix.xi_star;
    c[5] = mix.r_sd_star;
    try {
      const GcvEstimates est = one_shot(solver, lam);
      c[6] = est.xi_hat;
      c[7] = est.r_sd_hat;
    } catch (const CorrectionBlowupError&) {
      // left as NaN: GCV undefined at this lambda
    }
    out.push_back(c);
  }
  return out;
}

/// Runs cfg.reps independent replicates in parallel. Replicate r uses its own generator
/// seeded from (seed, r), so results do not depend on the thread count.
inline SimResult run_simulation(const SimConfig& cfg) {
  cfg.validate();
  SimResult res;
  res.config = cfg;
  const CovarianceEigen cov = gen_covariance(cfg.cov);
  const MatrixXd sigma = covariance_matrix(cfg.cov);
  const MatrixXd sigma_sqrt = cov.sqrt_matrix();

  const SpectralModel model = simulation_model(cfg, cov);
  for (double lam : cfg.lambda_grid) {
    const TheoreticalRisks th = theoretical_risks(model, lam);
    res.theory.push_back({th.r_teacher, th.r_pd, th.c_cross, th.d_gap, th.xi_star, th.r_sd_star, th.xi_star,
                          th.r_sd_star});
  }

  res.cells.assign(cfg.reps, std::vector<SimCell>(cfg.lambda_grid.size(), nan_cell()));
  res.rep_errors.assign(cfg.reps, "");
  parallel_for(cfg.reps, [&](std::size_t rep) {
    try {
      res.cells[rep] = simulate_rep(cfg, cov, sigma, sigma_sqrt, rep);
    } catch (const std::exception& e) {
      res.rep_errors[rep] = e.what();
    }
  });
  return res;
}

/// Long format: rep,lambda,metric,value; theory rows use rep="theory".
inline void write_sim_csv(std::ostream& os, const SimResult& res) {
  os << "rep,lambda,metric,value\n";
  const auto& grid = res.config.lambda_grid;
  for (std::size_t r = 0; r < res.cells.size(); ++r) {
    for (std::size_t li = 0; li < grid.size(); ++li) {
      for (std::size_t m = 0; m < kSimMetricNames.size(); ++m) {
        os << r << ',' << format_double(grid[li]) << ',' << kSimMetricNames[m] << ','
           << format_double(res.cells[r][li][m]) << '\n';
      }
    }
  }
  for (std::size_t li = 0; li < grid.size(); ++li) {
    for (std::size_t m = 0; m < kSimMetricNames.size(); ++m) {
      os << "theory," << format_double(grid[li]) << ',' << kSimMetricNames[m] << ','
         << format_double(res.theory[li][m]) << '\n';
    }
  }
}

namespace detail {
inline nlohmann::json json_numbers(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x)) a.push_back(x);
    else a.push_back(nullptr);
  }
  return a;
}
}  // namespace detail

/// Per-lambda mean, across-rep std ("std") and standard error of the mean ("sem") of each metric,
/// alongside the theoretical value.
inline nlohmann::json sim_summary_json(const SimResult& res) {
  const SimConfig& c = res.config;
  nlohmann::json j;
  j["n"] = c.n;
  j["p"] = c.p;
  j["gamma"] = static_cast<double>(c.p) / static_cast<double>(c.n);
  j["noise_var"] = c.noise_var;
  j["r2"] = c.sig.r2;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["lambda"] = detail::json_numbers(c.lambda_grid);
  nlohmann::json metrics;
  for (std::size_t m = 0; m < kSimMetricNames.size(); ++m) {
    const MetricSummary s = res.summary(static_cast<SimMetric>(m));
    std::vector<double> th(c.lambda_grid.size());
    for (std::size_t li = 0; li < th.size(); ++li) th[li] = res.theory[li][m];
    metrics[kSimMetricNames[m]] = {{"mean", detail::json_numbers(s.mean)},
                                   {"std", detail::json_numbers(s.std)},
                                   {"sem", detail::json_numbers(s.sem)},
                                   {"count", s.count},
                                   {"theory", detail::json_numbers(th)}};
  }
  j["metrics"] = metrics;
  nlohmann::json failed = nlohmann::json::array();
  for (std::size_t r = 0; r < res.rep_errors.size(); ++r) {
    if (!res.rep_errors[r].empty()) failed.push_back({{"rep", r}, {"error", res.rep_errors[r]}});
  }
  j["failed_reps"] = failed;
  return j;
}

}  // namespace sdridge
