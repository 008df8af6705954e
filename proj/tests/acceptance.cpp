// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sdridge/sdridge.hpp"
#include "support.hpp"

using namespace sdridge;
using namespace sdtest;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d: %s  %s [%s] (%.2fs)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

SimConfig paper_config(bool isotropic, std::size_t reps, std::uint64_t seed) {
  SimConfig c;
  c.n = 400;
  c.p = 200;
  c.cov.p = 200;
  if (!isotropic) {
    c.cov.kind = CovarianceSpec::Kind::ar1;
    c.cov.rho = 0.25;
    c.sig.kind = SignalSpec::Kind::top_aligned;
    c.sig.ratio_pct = 10.0;
    c.sig.factor = 0.9;
  }
  c.sig.r2 = 1.0;
  c.noise_var = 1.0;
  c.lambda_grid = log_grid(1e-2, 1e2, 40);
  c.reps = reps;
  c.seed = seed;
  return c;
}

// Criterion 1: closed-form xi* against a dense xi grid of directly evaluated oracle risks.
Outcome closed_form_vs_grid() {
  const auto t0 = std::chrono::steady_clock::now();
  Gen g(101);
  double worst_xi = 0.0, worst_r = 0.0;
  std::size_t inside = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Instance ins = random_instance(g, 30, 10);
    const double lam = log_uniform(g, 0.05, 5.0);
    const RidgeSolver solver(ins.train);
    const RidgeFit t = fit_ridge(solver, lam);
    const RidgeFit pd = pd_refit(solver, t);
    const MixResult mix = optimal_mix(risk_components_oracle(t, pd, ins.sigma, ins.beta, ins.noise_var));
    double best = 1e300, best_xi = 0.0;
    for (int k = -10000; k <= 10000; ++k) {
      const double xi = k * 1e-3;
      const double r = oracle_risk((1.0 - xi) * t.beta + xi * pd.beta, ins);
      if (r < best) {
        best = r;
        best_xi = xi;
      }
    }
    if (std::abs(mix.xi_star) <= 10.0) ++inside;
    worst_xi = std::max(worst_xi, std::abs(best_xi - mix.xi_star));
    // R_sd* against the directly evaluated risk at xi*, and the grid cannot beat it
    const double direct = oracle_risk((1.0 - mix.xi_star) * t.beta + mix.xi_star * pd.beta, ins);
    worst_r = std::max({worst_r, std::abs(direct - mix.r_sd_star), std::max(0.0, mix.r_sd_star - best)});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {inside == 20 && worst_xi <= 2e-3 && worst_r <= 1e-8 && secs < 5.0,
          fmt("max|xi_grid-xi*|=%.2e, max R_sd* error=%.2e, xi* inside grid %g/20", worst_xi, worst_r,
              static_cast<double>(inside)) +
              fmt(", %.2fs (limit 5s)", secs)};
}

// Criterion 2: genuine mixed-label refits are the affine combination; PD fitted values are H^2 y.
Outcome affine_and_pd() {
  Gen g(202);
  double worst_mix = 0.0, worst_pd = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(g() % 40);
    const Eigen::Index p = 5 + static_cast<Eigen::Index>(g() % 60);  // covers p > n
    const Instance ins = random_instance(g, n, p);
    const double lam = log_uniform(g, 1e-2, 10.0);
    const double xi = uniform(g, -3.0, 3.0);
    const RidgeSolver solver(ins.train);
    const RidgeFit t = fit_ridge(solver, lam);
    const RidgeFit pd = pd_refit(solver, t);
    const RidgeFit mixed = mixed_label_fit(solver, lam, xi);
    const VectorXd affine = sd_coefficients(t, pd, xi);
    worst_mix = std::max(worst_mix, (mixed.beta - affine).norm() / std::max(1.0, affine.norm()));
    const MatrixXd h = dense_hat(ins.train.X, lam);
    const VectorXd h2y = h * (h * ins.train.y);
    worst_pd = std::max(worst_pd, (ins.train.X * pd.beta - h2y).norm() / std::max(1.0, h2y.norm()));
  }
  return {worst_mix <= 1e-10 && worst_pd <= 1e-10,
          fmt("max rel |mixed-affine|=%.2e, max rel |X b_pd - H^2 y|=%.2e", worst_mix, worst_pd)};
}

// Richardson-extrapolated central difference of the family's predictions in lambda.
template <class F>
double tangent_fd_error(const F& fam, double lam, const MatrixXd& xq) {
  auto pred = [&](double l) { return VectorXd(fam.predict(fam.fit(fam.labels(), l), xq)); };
  const RidgeFit t = fam.fit(fam.labels(), lam);
  const VectorXd f = fam.predict(t, xq);
  const VectorXd fpd = fam.predict(fam.pd_refit(t), xq);
  const double h = 1e-3 * lam;
  const VectorXd d1 = (pred(lam + h) - pred(lam - h)) / (2.0 * h);
  const VectorXd d2 = (pred(lam + h / 2) - pred(lam - h / 2)) / h;
  const VectorXd deriv = (4.0 * d2 - d1) / 3.0;
  return ((f - fpd) + lam * deriv).norm() / (f - fpd).norm();
}

// Criterion 3: tangent identity against finite differences for three smoother families.
Outcome tangent_identity() {
  Gen g(303);
  double worst[3] = {0, 0, 0};
  for (int inst = 0; inst < 5; ++inst) {
    const Instance ins = random_instance(g, 40, 12);
    const MatrixXd xq = gaussian_matrix(g, 15, 12);
    const MatrixXd b = gaussian_matrix(g, 12, 12);
    const MatrixXd omega = b * b.transpose() / 12.0 + 0.5 * MatrixXd::Identity(12, 12);
    const OrdinaryRidge ord(ins.train);
    const GeneralizedRidge gen(ins.train, omega);
    const KernelRidge ker = KernelRidge::with_median_bandwidth(ins.train);
    for (double lam : {0.03, 0.3, 3.0}) {
      worst[0] = std::max(worst[0], tangent_fd_error(ord, lam, xq));
      worst[1] = std::max(worst[1], tangent_fd_error(gen, lam, xq));
      worst[2] = std::max(worst[2], tangent_fd_error(ker, lam, xq));
    }
  }
  const double w = std::max({worst[0], worst[1], worst[2]});
  return {w <= 1e-6, fmt("max rel residual: ordinary %.2e, generalized %.2e, kernel %.2e", worst[0], worst[1], worst[2])};
}

// Criterion 4: sign rule and exact improvement, R' from the exact derivative of a dense solve.
Outcome sign_rule() {
  Gen g(404);
  std::size_t cases = 0, sign_ok = 0;
  double worst_rel = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(g() % 80);
    const Eigen::Index p = 3 + static_cast<Eigen::Index>(g() % 60);
    const Instance ins = random_instance(g, n, p);
    const double lam = log_uniform(g, 1e-2, 1e1);
    const RidgeSolver solver(ins.train);
    const RidgeFit t = fit_ridge(solver, lam);
    const RiskComponents rc = risk_components_oracle(t, pd_refit(solver, t), ins.sigma, ins.beta, ins.noise_var);
    const MixResult mix = optimal_mix(rc);
    const double rp = dense_risk_derivative(ins, lam);
    if (!(std::abs(rp) > 1e-6)) continue;
    ++cases;
    if ((mix.xi_star > 0) == (rp < 0) && mix.xi_star != 0.0) ++sign_ok;
    const double gain = rc.r_teacher - mix.r_sd_star;
    worst_rel = std::max(worst_rel, rel_err(gain, lam * lam * rp * rp / (4.0 * rc.d_gap)));
  }
  return {cases > 0 && sign_ok == cases && worst_rel <= 1e-8,
          fmt("sign agreement %g/%g, max rel gain error %.2e", static_cast<double>(sign_ok),
              static_cast<double>(cases), worst_rel)};
}

double max_rel_dev(const SimResult& res, SimMetric m) {
  const MetricSummary s = res.summary(m);
  double w = 0.0;
  for (std::size_t li = 0; li < s.mean.size(); ++li) w = std::max(w, rel_err(s.mean[li], res.theory_value(li, m)));
  return w;
}

// Criterion 5: Monte-Carlo means against deterministic equivalents.
Outcome deterministic_equivalents() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  for (bool iso : {true, false}) {
    const SimResult res = run_simulation(paper_config(iso, 30, iso ? 505 : 506));
    const double w[4] = {max_rel_dev(res, SimMetric::r), max_rel_dev(res, SimMetric::r_pd),
                         max_rel_dev(res, SimMetric::c), max_rel_dev(res, SimMetric::r_sd_star)};
    ok = ok && std::max({w[0], w[1], w[2], w[3]}) <= 0.05;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s: R %.3f R_pd %.3f C %.3f R_sd* %.3f; ", iso ? "isotropic" : "ar1+top", w[0],
                  w[1], w[2], w[3]);
    detail += buf;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok && secs < 120.0, detail + fmt("max relative deviation (limit 0.05); %.1fs (limit 120s)", secs)};
}

// Criteria 6 and 7 share one isotropic run.
const SimResult& isotropic_run() {
  static const SimResult res = run_simulation(paper_config(true, 30, 606));
  return res;
}

Outcome sign_flip() {
  const SimResult& res = isotropic_run();
  const MetricSummary s = res.summary(SimMetric::xi_star);
  const auto& grid = res.config.lambda_grid;
  std::vector<std::size_t> flips;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (s.mean[i] > 0 && s.mean[i + 1] <= 0) flips.push_back(i);
  }
  if (flips.size() != 1) return {false, fmt("found %g sign changes of mean xi*", static_cast<double>(flips.size()))};
  const std::size_t i = flips[0];
  // the flip lies in [grid[i], grid[i+1]]; one grid step of slack on each side
  const double lo = grid[i == 0 ? 0 : i - 1];
  const double hi = grid[std::min(i + 2, grid.size() - 1)];
  return {lo <= 0.5 && 0.5 <= hi, fmt("sign change between lambda=%.4f and %.4f (target 0.5)", grid[i], grid[i + 1])};
}

Outcome one_shot_consistency() {
  const SimResult& res = isotropic_run();
  const auto& grid = res.config.lambda_grid;
  // mean over reps and grid of |estimate - theory|; the oracle xi* and R_sd* of each rep are
  // scored the same way to show the Monte-Carlo floor at this n
  double sum_xi = 0.0, sum_r = 0.0, floor_xi = 0.0, floor_r = 0.0, worst_bias = 0.0;
  std::size_t cells = 0;
  for (std::size_t li = 0; li < grid.size(); ++li) {
    const double xi_th = res.theory_value(li, SimMetric::xi_star);
    const double r_th = res.theory_value(li, SimMetric::r_sd_star);
    double mean_xi_hat = 0.0;
    for (std::size_t r = 0; r < res.cells.size(); ++r) {
      sum_xi += std::abs(res.value(r, li, SimMetric::xi_hat) - xi_th);
      sum_r += std::abs(res.value(r, li, SimMetric::r_sd_hat) - r_th) / r_th;
      floor_xi += std::abs(res.value(r, li, SimMetric::xi_star) - xi_th);
      floor_r += std::abs(res.value(r, li, SimMetric::r_sd_star) - r_th) / r_th;
      mean_xi_hat += res.value(r, li, SimMetric::xi_hat) / static_cast<double>(res.cells.size());
    }
    worst_bias = std::max(worst_bias, std::abs(mean_xi_hat - xi_th));
    cells += res.cells.size();
  }
  const double k = static_cast<double>(cells);
  return {sum_xi / k <= 0.1 && sum_r / k <= 0.05,
          fmt("mean |xi_hat-xi*_th|=%.4f (limit 0.1), mean rel |R_sd_hat-R_sd*_th|=%.4f (limit 0.05)", sum_xi / k,
              sum_r / k) +
              fmt("; oracle xi*, R_sd* score %.4f, %.4f", floor_xi / k, floor_r / k) +
              fmt("; max |mean_rep xi_hat - xi*_th| over grid %.4f", worst_bias)};
}

// Criterion 8: extreme-lambda limits.
Outcome extreme_lambda() {
  const ExtremeLimits e = extreme_limits(2.0, 0.2);
  double worst = 0.0;
  for (double snr : {0.5, 2.0, 5.0}) {
    for (double gamma : {0.2, 0.5, 2.0}) {
      const ExtremeLimits lim = extreme_limits(snr, gamma);
      const SpectralModel model = SpectralModel::isotropic(snr, 1.0, gamma);
      const double rstar = ridge_optimal_risk_isotropic(snr, gamma, 1.0);
      const double g0 = theoretical_risks(model, 1e-8).r_sd_star / rstar - 1.0;
      const double ginf = theoretical_risks(model, 1e8).r_sd_star / rstar - 1.0;
      worst = std::max({worst, rel_err(g0, lim.gap_zero), rel_err(ginf, lim.gap_inf)});
    }
  }
  return {e.gap_zero <= 1e-4 && e.gap_zero >= 0.0 && worst <= 1e-3,
          fmt("gap at lambda->0 for (SNR, gamma)=(2, 0.2): %.3e; max rel disagreement with theory %.2e", e.gap_zero,
              worst)};
}

// Criterion 9: negative moments of a Wishart spectrum.
Outcome mp_moments() {
  Gen g(909);
  const Eigen::Index n = 2000, p = 1000;
  const MatrixXd x = gaussian_matrix(g, n, p);
  const MatrixXd s = x.transpose() * x / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  const double m1 = ev.cwiseInverse().mean();
  const double m2 = ev.cwiseInverse().cwiseAbs2().mean();
  const MpMoments mp = mp_negative_moments(0.5);
  const double e1 = rel_err(m1, mp.m1), e2 = rel_err(m2, mp.m2);
  return {std::abs(mp.m1 - 2.0) < 1e-15 && std::abs(mp.m2 - 8.0) < 1e-15 && e1 <= 0.02 && e2 <= 0.05,
          fmt("mean 1/s=%.4f (2), mean 1/s^2=%.4f (8), rel err %.4f", m1, m2, std::max(e1, e2))};
}

// Criterion 10: recursive monotonicity and anchored nonmonotonicity.
Outcome multiround_check() {
  SimConfig cfg = paper_config(true, 1, 0);
  const CovarianceEigen cov = gen_covariance(cfg.cov);
  const MatrixXd root = cov.sqrt_matrix();
  const std::vector<double> grid = log_grid(1e-2, 1e2, 20);
  double worst_step = -1e300;
  std::size_t anchored_hits = 0;
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    Rng rng(stream_seed(1010, inst));
    const SimDraw d = draw_instance(cfg, cov, root, rng);
    const RidgeSolver solver(Dataset(d.x, d.y));
    const RiskSource src = OracleRisk{Population(MatrixXd::Identity(200, 200), d.beta, 1.0)};
    for (double lam : grid) {
      const auto rec = multiround(solver, lam, 5, MultiroundMode::recursive, src);
      const auto& hist = rec.back().risk_history;
      for (std::size_t k = 0; k + 1 < hist.size(); ++k) worst_step = std::max(worst_step, hist[k + 1] - hist[k]);
      const auto anc = multiround(solver, lam, 2, MultiroundMode::anchored, src);
      if (anc.back().risk_history[2] > rec[1].risk_history[1] + 1e-12) ++anchored_hits;
    }
  }
  return {worst_step <= 1e-10 && anchored_hits > 0,
          fmt("max R_{k+1}-R_k=%.2e; anchored round-2 above one-round optimum in %g of 200 (instance, lambda) cells",
              worst_step, static_cast<double>(anchored_hits))};
}

// Criterion 11: same-X dominates fresh-X, in the limit and at finite n.
Outcome same_vs_fresh() {
  double worst_gap = 1e300;
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (double snr : {0.5, 2.0, 5.0}) {
      const SpectralModel model = SpectralModel::isotropic(snr, 1.0, gamma);
      for (double lam : log_grid_per_decade(1e-2, 1e2, 60)) {
        const FreshLimits fr = freshx_isotropic_limits(snr, gamma, 1.0, lam);
        worst_gap = std::min(worst_gap, fr.r_sd_fr_star - theoretical_risks(model, lam).r_sd_star);
      }
    }
  }

  SimConfig cfg = paper_config(true, 1, 0);
  cfg.sig.r2 = 2.0;
  const CovarianceEigen cov = gen_covariance(cfg.cov);
  const MatrixXd root = cov.sqrt_matrix();
  const std::vector<double> grid = log_grid(1e-2, 1e2, 9);
  const std::size_t reps = 30;
  std::vector<std::vector<double>> diff(grid.size(), std::vector<double>(reps));
  parallel_for(reps, [&](std::size_t rep) {
    Rng rng(stream_seed(1111, rep));
    const SimDraw d = draw_instance(cfg, cov, root, rng);
    const MatrixXd fresh = draw_entries(400, 200, EntryDist::gaussian, rng) * root;
    const RidgeSolver solver(Dataset(d.x, d.y));
    const Population pop(MatrixXd::Identity(200, 200), d.beta, 1.0);
    for (std::size_t li = 0; li < grid.size(); ++li) {
      const RidgeFit t = fit_ridge(solver, grid[li]);
      const double same = optimal_mix(risk_components_oracle(t.beta, pd_refit(solver, t).beta, pop)).r_sd_star;
      const FreshPath path(solver, fresh, grid[li]);
      const double fr = optimal_mix(risk_components_oracle(t.beta, path.fresh_pd(), pop)).r_sd_star;
      diff[li][rep] = same - fr;
    }
  });
  std::size_t ok_cells = 0;
  double worst_z = -1e300;
  for (const auto& dl : diff) {
    double m = 0.0, ss = 0.0;
    for (double v : dl) m += v / static_cast<double>(reps);
    for (double v : dl) ss += (v - m) * (v - m);
    const double se = std::sqrt(ss / static_cast<double>(reps - 1)) / std::sqrt(static_cast<double>(reps));
    if (m <= 2.0 * se) ++ok_cells;
    worst_z = std::max(worst_z, se > 0 ? m / se : (m > 0 ? 1e300 : -1e300));
  }
  return {worst_gap >= -1e-12 && ok_cells == grid.size(),
          fmt("min limit gap R_sd_fr*-R_sd*=%.2e; finite-sample lambdas within 2 SE: %g/9", worst_gap,
              static_cast<double>(ok_cells)) +
              fmt(" (max mean/SE of same-fresh %.2f)", worst_z)};
}

// Criterion 12: seeded pipelines are bit-identical across re-runs and thread counts.
Outcome determinism() {
  SimConfig cfg = paper_config(false, 6, 1212);
  cfg.n = 120;
  cfg.p = 60;
  cfg.cov.p = 60;
  cfg.lambda_grid = log_grid(1e-2, 1e2, 8);
  auto dump = [](const SimConfig& c) {
    std::ostringstream os;
    write_sim_csv(os, run_simulation(c));
    return os.str();
  };
  ::setenv("SDRIDGE_THREADS", "1", 1);
  const std::string a = dump(cfg);
  ::setenv("SDRIDGE_THREADS", "4", 1);
  const std::string b = dump(cfg);
  const std::string c = dump(cfg);
  ::unsetenv("SDRIDGE_THREADS");
  bool ok = a == b && b == c;

  std::size_t commands = 0;
  for (Subcommand cmd : {Subcommand::sd_curve, Subcommand::tune, Subcommand::multiround, Subcommand::kernel,
                         Subcommand::compare_fresh, Subcommand::fit}) {
    RunConfig rc;
    rc.command = cmd;
    rc.n = 80;
    rc.p = 30;
    rc.reps = 3;
    rc.seed = 77;
    rc.lambda_points = 5;
    rc.xi_points = 21;
    if (cmd == Subcommand::fit) rc.lambda = 0.5;
    std::ostringstream x, y;
    write_report(x, run_command(rc), OutputFormat::csv);
    write_report(y, run_command(rc), OutputFormat::json);
    std::ostringstream x2;
    write_report(x2, run_command(rc), OutputFormat::csv);
    ok = ok && x.str() == x2.str();
    ++commands;
  }
  return {ok, fmt("simulation CSV identical across 3 runs (1 and 4 threads); %g pipeline commands re-run identically",
                  static_cast<double>(commands))};
}

}  // namespace

int main() {
  report(1, "closed-form xi* vs dense xi grid", closed_form_vs_grid);
  report(2, "affine path and PD = H^2 y", affine_and_pd);
  report(3, "tangent identity vs finite differences", tangent_identity);
  report(4, "sign rule and strict improvement", sign_rule);
  report(5, "deterministic equivalents (n=400, p=200, 30 reps)", deterministic_equivalents);
  report(6, "sign flip of mean xi* at lambda*=0.5", sign_flip);
  report(7, "one-shot GCV consistency", one_shot_consistency);
  report(8, "extreme-lambda limits", extreme_lambda);
  report(9, "MP negative moments", mp_moments);
  report(10, "multi-round monotonicity", multiround_check);
  report(11, "same-X dominates fresh-X", same_vs_fresh);
  report(12, "determinism", determinism);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
