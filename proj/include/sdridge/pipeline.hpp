#pragma once

// Subcommand pipelines behind the command-line tool. Each command produces a Report
// (a numeric table plus scalar metadata) that is emitted as CSV or JSON.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sdridge/asymptotics.hpp"
#include "sdridge/format.hpp"
#include "sdridge/io.hpp"
#include "sdridge/ridge.hpp"
#include "sdridge/simulation.hpp"
#include "sdridge/smoother.hpp"
#include "sdridge/structural.hpp"
#include "sdridge/tuning.hpp"
#include "sdridge/variants.hpp"

namespace sdridge {

enum class Subcommand { fit, sd_curve, tune, asymptotics, simulate, multiround, kernel, compare_fresh };
enum class OutputFormat { csv, json };
enum class RoundRiskSource { automatic, oracle, test, gcv };

struct RunConfig {
  Subcommand command = Subcommand::sd_curve;

  // data: a CSV file, or a synthetic draw when empty
  std::string input;
  std::string target_col;
  bool has_header = true;
  bool standardize = true;
  double split_ratio = 0.7;
  SplitMode split_mode = SplitMode::random;
  std::uint64_t seed = 0;

  // lambda grid (log-spaced) or a single value
  double lambda_min = 1e-2;
  double lambda_max = 1e2;
  std::size_t lambda_points = 0;  // 0: 60 points per decade
  std::optional<double> lambda;

  // synthetic model
  Eigen::Index n = 400;
  Eigen::Index p = 200;
  Eigen::Index n_test = 0;  // 0: same as n
  double snr = 1.0;
  double noise_var = 1.0;
  CovarianceSpec::Kind cov = CovarianceSpec::Kind::isotropic;
  double rho = 0.25;
  double spike = 5.0;
  SignalSpec::Kind signal = SignalSpec::Kind::isotropic;
  double align_ratio = 10.0;
  double align_factor = 0.9;
  EntryDist entries = EntryDist::gaussian;
  std::size_t reps = 30;

  // asymptotics
  bool isotropic = false;
  double gamma = 0.5;

  // multiround
  std::size_t rounds = 5;
  MultiroundMode mode = MultiroundMode::recursive;
  RoundRiskSource risk_source = RoundRiskSource::automatic;

  // kernel / generalized ridge
  std::string kernel_bandwidth = "median";
  std::string omega;

  // fresh-X comparison
  Eigen::Index m = 0;  // 0: same as n
  double xi_min = -10.0;
  double xi_max = 10.0;
  std::size_t xi_points = 401;

  std::string output;  // empty: standard output
  OutputFormat format = OutputFormat::csv;

  void validate() const {
    if (lambda) {
      require_positive_lambda(*lambda);
    } else {
      if (!(lambda_min > 0.0)) throw ParameterError("--lambda-min must be positive");
      if (!(lambda_max >= lambda_min)) throw ParameterError("--lambda-max must be >= --lambda-min");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ParameterError("--split-ratio must be in (0, 1)");
    if (!(snr > 0.0)) throw ParameterError("--snr must be positive");
    if (!(noise_var > 0.0)) throw ParameterError("--noise-var must be positive");
    if (n < 2 || p < 1) throw ParameterError("--n must be >= 2 and --p >= 1");
    if (reps < 1) throw ParameterError("--reps must be positive");
    if (rounds < 1) throw ParameterError("--rounds must be positive");
    if (xi_points < 2 || !(xi_max > xi_min)) throw ParameterError("xi grid needs xi-max > xi-min and >= 2 points");
  }

  [[nodiscard]] std::vector<double> grid() const {
    if (lambda) return {*lambda};
    if (lambda_points == 0) return log_grid_per_decade(lambda_min, lambda_max, 60);
    return log_grid(lambda_min, lambda_max, lambda_points);
  }

  [[nodiscard]] CovarianceSpec cov_spec() const {
    CovarianceSpec c;
    c.kind = cov;
    c.p = p;
    c.rho = rho;
    c.strength = spike;
    c.spike_seed = seed;
    return c;
  }

  [[nodiscard]] SignalSpec signal_spec() const {
    SignalSpec s;
    s.kind = signal;
    s.ratio_pct = align_ratio;
    s.factor = align_factor;
    s.r2 = snr * noise_var;
    return s;
  }

  [[nodiscard]] SimConfig sim_config() const {
    SimConfig c;
    c.n = n;
    c.p = p;
    c.cov = cov_spec();
    c.sig = signal_spec();
    c.noise_var = noise_var;
    c.lambda_grid = grid();
    c.reps = reps;
    c.seed = seed;
    c.entry_dist = entries;
    return c;
  }
};

struct Report {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json meta = nlohmann::json::object();
  std::string raw_csv;  // set when the command emits its own long-format CSV
};

/// Train/test pair plus the population model when the data are synthetic.
struct Problem {
  Dataset train;
  Dataset test;
  std::optional<Population> population;
};

inline Problem load_problem(const RunConfig& cfg) {
  if (!cfg.input.empty()) {
    const Dataset all = load_csv(cfg.input, {cfg.target_col, cfg.has_header});
    auto [tr, te] = split(all, cfg.split_ratio, cfg.split_mode, cfg.seed);
    if (!cfg.standardize) return {std::move(tr), std::move(te), std::nullopt};
    Standardized s = standardize(tr, te);
    return {std::move(s.train), std::move(s.test), std::nullopt};
  }
  SimConfig sc = cfg.sim_config();
  const CovarianceEigen cov = gen_covariance(sc.cov);
  const MatrixXd sigma = covariance_matrix(sc.cov);
  const MatrixXd root = cov.sqrt_matrix();
  Rng rng(stream_seed(cfg.seed, 0));
  const SimDraw d = draw_instance(sc, cov, root, rng);
  SimConfig tc = sc;
  tc.n = cfg.n_test > 0 ? cfg.n_test : cfg.n;
  // reuse the training signal for the test draw
  MatrixXd xt = draw_entries(tc.n, tc.p, tc.entry_dist, rng) * root;
  std::normal_distribution<double> normal(0.0, std::sqrt(cfg.noise_var));
  VectorXd yt = xt * d.beta;
  for (Eigen::Index i = 0; i < yt.size(); ++i) yt(i) += normal(rng);
  return {Dataset(d.x, d.y), Dataset(std::move(xt), std::move(yt)), Population(sigma, d.beta, cfg.noise_var)};
}

inline RiskComponents pair_components(const Problem& prob, const RidgeFit& teacher, const RidgeFit& pd) {
  if (prob.population) return risk_components_oracle(teacher.beta, pd.beta, *prob.population);
  return risk_components_empirical(teacher, pd, prob.test);
}

inline const char* risk_label(const Problem& prob) { return prob.population ? "oracle" : "test"; }

inline Report cmd_fit(const RunConfig& cfg) {
  if (!cfg.lambda) throw ParameterError("fit needs --lambda");
  const Problem prob = load_problem(cfg);
  const RidgeSolver solver(prob.train);
  const double lam = *cfg.lambda;
  const RidgeFit t = fit_ridge(solver, lam);
  const RidgeFit pd = pd_refit(solver, t);
  const GcvEstimates est = one_shot(solver, lam);
  const VectorXd sd = sd_coefficients(t, pd, est.xi_hat);
  Report r;
  r.columns = {"index", "teacher", "pd", "sd"};
  for (Eigen::Index j = 0; j < t.beta.size(); ++j) r.rows.push_back({static_cast<double>(j), t.beta(j), pd.beta(j), sd(j)});
  nlohmann::json names = nlohmann::json::array();
  for (const auto& nm : prob.train.feature_names) names.push_back(nm);
  r.meta = {{"lambda", lam}, {"xi_hat", est.xi_hat}, {"df", est.df}, {"df_pd", est.df_pd}, {"features", names}};
  return r;
}

inline Report cmd_sd_curve(const RunConfig& cfg) {
  const Problem prob = load_problem(cfg);
  const RidgeSolver solver(prob.train);
  Report r;
  r.columns = {"lambda", "R", "R_pd", "C", "D", "xi_star", "R_sd_star", "R_prime"};
  for (double lam : cfg.grid()) {
    const RidgeFit t = fit_ridge(solver, lam);
    const RiskComponents rc = pair_components(prob, t, pd_refit(solver, t));
    const MixResult mix = optimal_mix(rc);
    r.rows.push_back({lam, rc.r_teacher, rc.r_pd, rc.c_cross, rc.d_gap, mix.xi_star, mix.r_sd_star,
                      risk_slope(rc, lam)});
  }
  r.meta = {{"risk", risk_label(prob)}, {"n_train", prob.train.n()}, {"n_test", prob.test.n()}, {"p", prob.train.p()}};
  return r;
}

inline Report cmd_tune(const RunConfig& cfg) {
  const Problem prob = load_problem(cfg);
  const RidgeSolver solver(prob.train);
  Report r;
  r.columns = {"lambda", "df", "df_pd", "R_hat", "R_pd_hat", "C_hat", "D_hat", "xi_hat", "R_sd_hat",
               "R_eval", "R_sd_hat_eval"};
  std::size_t skipped = 0;
  for (double lam : cfg.grid()) {
    GcvEstimates est;
    try {
      est = one_shot(solver, lam);
    } catch (const CorrectionBlowupError&) {
      ++skipped;
      continue;
    }
    const RidgeFit t = fit_ridge(solver, lam);
    const RiskComponents rc = pair_components(prob, t, pd_refit(solver, t));
    r.rows.push_back({lam, est.df, est.df_pd, est.r_hat, est.r_pd_hat, est.c_hat, est.d_hat, est.xi_hat,
                      est.r_sd_hat, rc.r_teacher, sd_risk_at(rc, est.xi_hat)});
  }
  r.meta = {{"risk", risk_label(prob)}, {"skipped_lambdas", skipped}};
  return r;
}

inline Report cmd_asymptotics(const RunConfig& cfg) {
  SpectralModel model;
  if (cfg.isotropic) {
    model = SpectralModel::isotropic(cfg.snr * cfg.noise_var, cfg.noise_var, cfg.gamma);
  } else {
    const CovarianceEigen cov = gen_covariance(cfg.cov_spec());
    const VectorXd proj = (cfg.snr * cfg.noise_var * signal_weights(cfg.signal_spec(), cfg.p)).cwiseSqrt();
    model = SpectralModel(cov.eigenvalues, proj, cfg.noise_var, cfg.gamma);
  }
  Report r;
  r.columns = {"lambda", "kappa", "R", "R_pd", "C", "D", "xi_star", "R_sd_star"};
  if (cfg.isotropic) r.columns.insert(r.columns.end(), {"xi_fresh_star", "R_sd_fresh_star"});
  for (double lam : cfg.grid()) {
    const AsymptoticState st = solve_state(model, lam);
    const TheoreticalRisks th = theoretical_risks(st, model);
    std::vector<double> row{lam, st.kappa, th.r_teacher, th.r_pd, th.c_cross, th.d_gap, th.xi_star, th.r_sd_star};
    if (cfg.isotropic) {
      const FreshLimits fr = freshx_isotropic_limits(cfg.snr, cfg.gamma, cfg.noise_var, lam);
      row.push_back(fr.xi_fr_star);
      row.push_back(fr.r_sd_fr_star);
    }
    r.rows.push_back(std::move(row));
  }
  r.meta = {{"gamma", cfg.gamma}, {"snr", cfg.snr}, {"noise_var", cfg.noise_var}};
  if (cfg.isotropic) {
    r.meta["lambda_opt"] = cfg.gamma / cfg.snr;
    r.meta["R_opt"] = ridge_optimal_risk_isotropic(cfg.snr, cfg.gamma, cfg.noise_var);
    r.meta["s_star"] = s_star(cfg.snr, cfg.gamma);
    r.meta["gap_inf"] = gap_at_infinity(cfg.snr, cfg.gamma);
    if (cfg.gamma != 1.0) r.meta["gap_zero"] = gap_at_zero(cfg.snr, cfg.gamma);
  }
  return r;
}

inline Report cmd_simulate(const RunConfig& cfg) {
  const SimResult res = run_simulation(cfg.sim_config());
  Report r;
  std::ostringstream os;
  write_sim_csv(os, res);
  r.raw_csv = os.str();
  r.meta = sim_summary_json(res);
  return r;
}

inline Report cmd_multiround(const RunConfig& cfg) {
  const Problem prob = load_problem(cfg);
  const RidgeSolver solver(prob.train);
  RoundRiskSource src = cfg.risk_source;
  if (src == RoundRiskSource::automatic) src = prob.population ? RoundRiskSource::oracle : RoundRiskSource::test;
  if (src == RoundRiskSource::oracle && !prob.population) {
    throw ParameterError("oracle risk source needs synthetic data (no --input)");
  }
  RiskSource source = GcvRisk{};
  if (src == RoundRiskSource::oracle) source = OracleRisk{*prob.population};
  if (src == RoundRiskSource::test) source = TestSetRisk{prob.test};

  Report r;
  r.columns = {"lambda", "round", "xi", "risk", "risk_eval"};
  for (double lam : cfg.grid()) {
    const auto states = multiround(solver, lam, cfg.rounds, cfg.mode, source);
    for (const RoundState& s : states) {
      const double xi = s.round == 0 ? 0.0 : s.xi_history.back();
      // risk of this round's teacher against the oracle or test set, whatever selected xi
      const double eval = pair_components(prob, s.teacher, s.teacher).r_teacher;
      r.rows.push_back({lam, static_cast<double>(s.round), xi, s.risk_history.back(), eval});
    }
  }
  const char* names[] = {"automatic", "oracle", "test", "gcv"};
  r.meta = {{"mode", cfg.mode == MultiroundMode::recursive ? "recursive" : "anchored"},
            {"risk_source", names[static_cast<int>(src)]},
            {"rounds", cfg.rounds}};
  return r;
}

inline Report cmd_kernel(const RunConfig& cfg) {
  const Problem prob = load_problem(cfg);
  Report r;
  r.columns = {"lambda", "R", "R_pd", "C", "D", "xi_star", "R_sd_star", "R_prime"};
  auto run_family = [&](const auto& family) {
    for (double lam : cfg.grid()) {
      const SmootherSdResult s = smoother_sd(family, lam, prob.test);
      r.rows.push_back({lam, s.components.r_teacher, s.components.r_pd, s.components.c_cross, s.components.d_gap,
                        s.xi_star, s.r_sd_star, s.slope});
    }
  };
  if (!cfg.omega.empty()) {
    const GeneralizedRidge fam(prob.train, load_matrix_csv(cfg.omega));
    r.meta = {{"family", "generalized"}};
    run_family(fam);
    return r;
  }
  double h = 0.0;
  if (cfg.kernel_bandwidth == "median") {
    h = median_bandwidth(prob.train.X);
  } else {
    try {
      std::size_t used = 0;
      h = std::stod(cfg.kernel_bandwidth, &used);
      if (used != cfg.kernel_bandwidth.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParameterError("--kernel-bandwidth must be 'median' or a positive number");
    }
  }
  const KernelRidge fam(prob.train, h);
  r.meta = {{"family", "kernel"}, {"bandwidth", h}, {"jitter", fam.jitter()}};
  run_family(fam);
  return r;
}

/// Same-X optimal SD against the fresh-X affine and mixed-loss students on synthetic data,
/// averaged over reps with oracle risks.
inline Report cmd_compare_fresh(const RunConfig& cfg) {
  if (!cfg.input.empty()) throw ParameterError("compare-fresh runs on synthetic data only");
  SimConfig sc = cfg.sim_config();
  sc.validate();
  const Eigen::Index m = cfg.m > 0 ? cfg.m : cfg.n;
  const CovarianceEigen cov = gen_covariance(sc.cov);
  const MatrixXd sigma = covariance_matrix(sc.cov);
  const MatrixXd root = cov.sqrt_matrix();
  const std::vector<double> grid = sc.lambda_grid;
  std::vector<double> xi_grid(cfg.xi_points);
  for (std::size_t i = 0; i < cfg.xi_points; ++i) {
    xi_grid[i] = cfg.xi_min + (cfg.xi_max - cfg.xi_min) * static_cast<double>(i) / static_cast<double>(cfg.xi_points - 1);
  }

  constexpr std::size_t kCols = 7;  // R, R_sd same, R_sd fresh affine, R_mixed best, xi same, xi affine, xi mixed
  std::vector<std::vector<std::array<double, kCols>>> per(cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t rep) {
    Rng rng(stream_seed(cfg.seed, rep));
    const SimDraw d = draw_instance(sc, cov, root, rng);
    const MatrixXd fresh = draw_entries(m, sc.p, sc.entry_dist, rng) * root;
    const RidgeSolver solver(Dataset(d.x, d.y));
    const Population pop(sigma, d.beta, sc.noise_var);
    auto risk = [&](const VectorXd& b) {
      const VectorXd e = b - d.beta;
      return e.dot(sigma * e) + sc.noise_var;
    };
    for (double lam : grid) {
      const RidgeFit t = fit_ridge(solver, lam);
      const MixResult same = optimal_mix(risk_components_oracle(t.beta, pd_refit(solver, t).beta, pop));
      const FreshPath path(solver, fresh, lam);
      const RiskComponents frc = risk_components_oracle(t.beta, path.fresh_pd(), pop);
      const MixResult aff = optimal_mix(frc);
      const FreshScan scan = freshx_mixed_scan(path, xi_grid, risk);
      per[rep].push_back({frc.r_teacher, same.r_sd_star, aff.r_sd_star, scan.best_risk, same.xi_star, aff.xi_star,
                          scan.best_xi});
    }
  });

  Report r;
  r.columns = {"lambda", "R", "R_sd_same", "R_sd_same_sem", "R_sd_fresh_affine", "R_sd_fresh_affine_sem",
               "R_fresh_mixed", "R_fresh_mixed_sem", "xi_same", "xi_fresh_affine", "xi_fresh_mixed"};
  const double reps = static_cast<double>(cfg.reps);
  for (std::size_t li = 0; li < grid.size(); ++li) {
    std::array<double, kCols> mean{}, sq{};
    for (const auto& rp : per) {
      for (std::size_t c = 0; c < kCols; ++c) mean[c] += rp[li][c] / reps;
    }
    for (const auto& rp : per) {
      for (std::size_t c = 0; c < kCols; ++c) sq[c] += (rp[li][c] - mean[c]) * (rp[li][c] - mean[c]);
    }
    auto sem = [&](std::size_t c) {
      return cfg.reps > 1 ? std::sqrt(sq[c] / (reps - 1.0)) / std::sqrt(reps) : std::numeric_limits<double>::quiet_NaN();
    };
    r.rows.push_back({grid[li], mean[0], mean[1], sem(1), mean[2], sem(2), mean[3], sem(3), mean[4], mean[5], mean[6]});
  }
  r.meta = {{"n", cfg.n}, {"m", m}, {"p", cfg.p}, {"reps", cfg.reps}};
  return r;
}

inline Report run_command(const RunConfig& cfg) {
  cfg.validate();
  switch (cfg.command) {
    case Subcommand::fit: return cmd_fit(cfg);
    case Subcommand::sd_curve: return cmd_sd_curve(cfg);
    case Subcommand::tune: return cmd_tune(cfg);
    case Subcommand::asymptotics: return cmd_asymptotics(cfg);
    case Subcommand::simulate: return cmd_simulate(cfg);
    case Subcommand::multiround: return cmd_multiround(cfg);
    case Subcommand::kernel: return cmd_kernel(cfg);
    case Subcommand::compare_fresh: return cmd_compare_fresh(cfg);
  }
  throw ParameterError("unknown subcommand");
}

/// CSV: header plus one row per table row. JSON: {"columns", "rows", "meta"}, non-finite as null.
/// Commands with their own long-format CSV emit only their summary object as JSON.
inline void write_report(std::ostream& os, const Report& r, OutputFormat fmt) {
  if (fmt == OutputFormat::csv) {
    if (!r.raw_csv.empty()) {
      os << r.raw_csv;
      return;
    }
    for (std::size_t c = 0; c < r.columns.size(); ++c) os << (c ? "," : "") << r.columns[c];
    os << '\n';
    for (const auto& row : r.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
      os << '\n';
    }
    return;
  }
  if (!r.raw_csv.empty()) {
    os << r.meta.dump(2) << '\n';
    return;
  }
  nlohmann::json j;
  j["columns"] = r.columns;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back(detail::json_numbers(row));
  j["rows"] = rows;
  j["meta"] = r.meta;
  os << j.dump(2) << '\n';
}

/// Runs one command; errors go to `err` and yield exit code 1.
inline int run(const RunConfig& cfg, std::ostream& err = std::cerr) {
  try {
    const Report rep = run_command(cfg);
    if (cfg.output.empty()) {
      write_report(std::cout, rep, cfg.format);
    } else {
      std::ofstream out(cfg.output);
      if (!out) throw DataError("cannot write '" + cfg.output + "'");
      write_report(out, rep, cfg.format);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "sdridge: error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sdridge
