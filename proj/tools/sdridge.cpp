// Command-line front end: parses flags (and an optional config file) into a RunConfig.

#include <map>
#include <string>

#include <CLI11.hpp>

#include "sdridge/pipeline.hpp"

namespace {

template <class E>
CLI::CheckedTransformer choices(const std::map<std::string, E>& m) {
  return CLI::CheckedTransformer(m, CLI::ignore_case);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sdridge;
  RunConfig cfg;
  CLI::App app{"Optimal self-distillation for ridge regression"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  double lambda = 0.0;
  app.add_option("--input", cfg.input, "CSV file (synthetic data when omitted)");
  app.add_option("--target-col", cfg.target_col, "target column name or 0-based index (default: last)");
  app.add_flag("!--no-header", cfg.has_header, "CSV has no header row");
  app.add_flag("!--no-standardize", cfg.standardize, "skip train-statistic standardization");
  app.add_option("--split-ratio", cfg.split_ratio, "train fraction");
  app.add_option("--split-mode", cfg.split_mode)
      ->transform(choices<SplitMode>({{"random", SplitMode::random}, {"sequential", SplitMode::sequential}}));
  app.add_option("--seed", cfg.seed);
  app.add_option("--lambda-min", cfg.lambda_min);
  app.add_option("--lambda-max", cfg.lambda_max);
  app.add_option("--lambda-points", cfg.lambda_points, "log-spaced grid size (default: 60 per decade)");
  auto* lambda_opt = app.add_option("--lambda", lambda, "single lambda (overrides the grid)");
  app.add_option("--output", cfg.output, "output path (default: stdout)");
  app.add_option("--format", cfg.format)
      ->transform(choices<OutputFormat>({{"csv", OutputFormat::csv}, {"json", OutputFormat::json}}));

  app.add_option("--n", cfg.n, "synthetic training size");
  app.add_option("--p", cfg.p, "synthetic dimension");
  app.add_option("--n-test", cfg.n_test, "synthetic test size (default: n)");
  app.add_option("--snr", cfg.snr, "signal-to-noise ratio r2 / sigma2");
  app.add_option("--noise-var", cfg.noise_var);
  app.add_option("--cov", cfg.cov)
      ->transform(choices<CovarianceSpec::Kind>({{"isotropic", CovarianceSpec::Kind::isotropic},
                                                 {"ar1", CovarianceSpec::Kind::ar1},
                                                 {"spiked", CovarianceSpec::Kind::spiked}}));
  app.add_option("--rho", cfg.rho, "AR1 correlation");
  app.add_option("--spike", cfg.spike, "spike strength");
  app.add_option("--signal", cfg.signal)
      ->transform(choices<SignalSpec::Kind>({{"isotropic", SignalSpec::Kind::isotropic},
                                             {"top", SignalSpec::Kind::top_aligned},
                                             {"bottom", SignalSpec::Kind::bottom_aligned}}));
  app.add_option("--align-ratio", cfg.align_ratio, "percent of eigendirections carrying the aligned mass");
  app.add_option("--align-factor", cfg.align_factor, "fraction of signal energy on them");
  app.add_option("--entries", cfg.entries)
      ->transform(choices<EntryDist>({{"gaussian", EntryDist::gaussian}, {"rademacher", EntryDist::rademacher}}));
  app.add_option("--reps", cfg.reps);

  auto* fit = app.add_subcommand("fit", "ridge, PD and GCV-tuned SD coefficients at --lambda");
  auto* curve = app.add_subcommand("sd-curve", "per-lambda R, R_pd, C, D, xi*, R_sd* on the test split");
  auto* tune = app.add_subcommand("tune", "per-lambda one-shot GCV estimates");
  auto* asym = app.add_subcommand("asymptotics", "deterministic-equivalent curves");
  asym->add_flag("--isotropic", cfg.isotropic);
  asym->add_option("--gamma", cfg.gamma);
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo comparison with theory");
  auto* multi = app.add_subcommand("multiround", "recursive or anchored multi-round SD");
  multi->add_option("--rounds", cfg.rounds);
  multi->add_option("--mode", cfg.mode)
      ->transform(choices<MultiroundMode>(
          {{"recursive", MultiroundMode::recursive}, {"anchored", MultiroundMode::anchored}}));
  multi->add_option("--risk-source", cfg.risk_source)
      ->transform(choices<RoundRiskSource>({{"oracle", RoundRiskSource::oracle},
                                            {"test", RoundRiskSource::test},
                                            {"gcv", RoundRiskSource::gcv}}));
  auto* kern = app.add_subcommand("kernel", "SD for Gaussian-kernel or generalized ridge");
  kern->add_option("--kernel-bandwidth", cfg.kernel_bandwidth, "'median' or a positive value");
  kern->add_option("--omega", cfg.omega, "p x p penalty matrix CSV (generalized ridge)");
  auto* fresh = app.add_subcommand("compare-fresh", "same-X versus fresh-X students on synthetic data");
  fresh->add_option("--m", cfg.m, "fresh design size (default: n)");
  fresh->add_option("--xi-min", cfg.xi_min);
  fresh->add_option("--xi-max", cfg.xi_max);
  fresh->add_option("--xi-points", cfg.xi_points);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (lambda_opt->count() > 0) cfg.lambda = lambda;

  const std::pair<CLI::App*, Subcommand> table[] = {
      {fit, Subcommand::fit},       {curve, Subcommand::sd_curve},     {tune, Subcommand::tune},
      {asym, Subcommand::asymptotics}, {sim, Subcommand::simulate},   {multi, Subcommand::multiround},
      {kern, Subcommand::kernel},   {fresh, Subcommand::compare_fresh}};
  for (const auto& [sub, cmd] : table) {
    if (sub->parsed()) cfg.command = cmd;
  }
  return run(cfg);
}
