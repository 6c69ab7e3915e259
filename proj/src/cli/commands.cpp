#include "fusemean/cli/commands.hpp"

#include "fusemean/cli/csv.hpp"
#include "fusemean/crossfit.hpp"
#include "fusemean/errors.hpp"
#include "fusemean/expr.hpp"
#include "fusemean/oracles.hpp"
#include "fusemean/parallel.hpp"
#include "fusemean/ustat.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace fusemean::cli {

namespace {

Json
pattern_json(const Pattern& s)
{
  Json out = Json::array();
  for (int v : s)
    out.push_back(v + 1);
  return out;
}

Json
doubles(const std::vector<double>& v)
{
  Json out = Json::array();
  for (double x : v)
    out.push_back(x);
  return out;
}

Json
strings(const std::vector<std::string>& v)
{
  Json out = Json::array();
  for (const auto& s : v)
    out.push_back(s);
  return out;
}

Json
table_json(const MarginalTable& t)
{
  Json j;
  j["pattern"] = pattern_json(t.pattern);
  Json atoms = Json::array();
  for (const auto& a : t.atoms)
    atoms.push_back(doubles(a));
  j["atoms"] = atoms;
  j["values"] = doubles(t.values);
  return j;
}

Json
tables_json(const std::vector<MarginalTable>& ts)
{
  Json out = Json::array();
  for (const auto& t : ts)
    out.push_back(table_json(t));
  return out;
}

Json
shifts_echo(const RunConfig& c)
{
  Json j = Json::object();
  for (const auto& [s, src] : c.shifts)
    j[format_pattern(s)] = src;
  return j;
}

struct Loaded
{
  FusedDataset data;
  PatternSet patterns;
  Functional functional;
  ShiftSpec shifts;
};

Loaded
load_data(const RunConfig& c)
{
  if (!c.data)
    throw ValidationError("config: data.path is required");
  FusedDataset data = ingest_csv(c.data->path, c.data->header);
  int d = csv_dimension(data);
  if (c.d && *c.d != d)
    throw ValidationError("config: d = " + std::to_string(*c.d) + " but the data have " +
                          std::to_string(d) + " columns");
  PatternSet patterns = make_patterns(c, d);
  check_patterns(data, patterns);
  Functional f = make_functional(c, d);
  ShiftSpec shifts = make_shifts(c, patterns);
  return { std::move(data), std::move(patterns), std::move(f), std::move(shifts) };
}

Json
base_echo(const RunConfig& c, const PatternSet& patterns)
{
  Json echo;
  if (c.data) {
    echo["data"] = { { "path", c.data->path }, { "header", c.data->header } };
  }
  echo["d"] = patterns.dimension();
  echo["patterns"] = patterns_json(patterns);
  echo["a"] = c.a ? Json(*c.a) : Json(nullptr);
  echo["shifts"] = shifts_echo(c);
  echo["alpha"] = c.alpha;
  return echo;
}

std::vector<double>
oracle_lambda(const OracleSpec& o, std::size_t k)
{
  if (o.lambda.size() != k)
    throw ValidationError("config: oracle.lambda needs one entry per pattern");
  for (double l : o.lambda)
    if (!(l > 0.0) || !std::isfinite(l))
      throw ValidationError("config: oracle.lambda must be positive and finite");
  return o.lambda;
}

double
parse_lambda_arg(const std::string& s)
{
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "infinity")
    return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size())
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("lambda must be a number or 'inf': " + s);
  }
}

Json
error_json(const std::string& type, const std::string& message)
{
  Json e;
  e["type"] = type;
  e["message"] = message;
  return e;
}

} // namespace

Json
cmd_estimate(const RunConfig& c)
{
  Loaded in = load_data(c);
  EstimatorConfig config = apply(c.estimator, default_config(in.data, in.patterns));
  EstimateReport r = estimate(in.data, in.patterns, in.shifts, in.functional, config, c.alpha);

  Json diag;
  diag["n"] = r.n;
  Json sizes = Json::object();
  for (const auto& [s, block] : in.data.incomplete)
    sizes[format_pattern(s)] = block.rows();
  diag["pattern_sizes"] = sizes;
  diag["half_sizes"] = { r.diagnostics.half_sizes[0], r.diagnostics.half_sizes[1] };
  Json pieces = Json::array();
  for (const auto& p : r.diagnostics.piece_sizes)
    pieces.push_back(Json(p));
  diag["piece_sizes"] = pieces;
  diag["chain_count"] = r.diagnostics.chain_count;
  diag["complete_truncation_rate"] = r.diagnostics.complete_truncation_rate;
  Json trunc = Json::object();
  for (std::size_t k = 0; k < in.patterns.size(); ++k)
    trunc[format_pattern(in.patterns[k])] = r.diagnostics.incomplete_truncation_rate[k];
  diag["incomplete_truncation_rate"] = trunc;
  Json halves = Json::array();
  for (std::size_t l = 0; l < 2; ++l) {
    const HalfComponents& h = r.halves[l];
    Json hj;
    hj["fit_size"] = h.fit_size;
    hj["average_size"] = h.average_size;
    hj["theta"] = h.theta;
    hj["mean_square"] = h.mean_square;
    hj["v_pattern"] = doubles(h.v_pattern);
    hj["r_hat"] = doubles(h.r_hat);
    hj["v_half"] = r.v_half[l];
    halves.push_back(hj);
  }
  diag["halves"] = halves;
  diag["warnings"] = strings(r.diagnostics.warnings);

  Json echo = base_echo(c, in.patterns);
  echo["estimator"] = to_json(r.config);

  Json out;
  out["theta_hat"] = r.theta_hat;
  out["v_hat"] = r.v_hat;
  out["ci"] = { { "lower", r.ci.lower }, { "upper", r.ci.upper }, { "alpha", r.ci.alpha } };
  out["diagnostics"] = diag;
  out["config_echo"] = echo;
  out["version"] = kVersion;
  return out;
}

Json
cmd_ustat(const RunConfig& c)
{
  Loaded in = load_data(c);
  if (in.shifts.mode() != ShiftMode::MCAR)
    throw ValidationError("the U-statistic estimator supports MCAR data only");
  UStatConfig config = c.ustat;
  if (!config.eta)
    config.eta = 1.0 / static_cast<double>(in.patterns.size());
  UStatResult r = ustat_estimate(in.data, in.patterns, in.functional, config);

  Json diag;
  diag["n"] = in.data.n();
  diag["term_averages"] = doubles(r.term_averages);
  Json tuples = Json::array();
  for (auto t : r.tuples_per_term)
    tuples.push_back(t);
  diag["tuples_per_term"] = tuples;
  diag["warnings"] = strings(r.warnings);

  Json echo = base_echo(c, in.patterns);
  echo["ustat"] = to_json(config);

  Json out;
  out["theta_hat"] = r.theta;
  out["v_hat"] = nullptr;
  out["ci"] = nullptr;
  out["diagnostics"] = diag;
  out["config_echo"] = echo;
  out["version"] = kVersion;
  return out;
}

Json
gaussian_oracle_report(double rho, double lambda1, double lambda2)
{
  GaussianOracle g = gaussian_bivariate_oracle(rho, lambda1, lambda2);
  Json out;
  out["kind"] = "gaussian";
  out["L"] = g.L;
  out["coefficients"] = { g.coefficient[0], g.coefficient[1] };
  out["complete_case_variance"] = 1.0 + rho * rho;
  Json echo;
  echo["rho"] = rho;
  echo["lambda"] = { std::isinf(lambda1) ? Json("inf") : Json(lambda1),
                     std::isinf(lambda2) ? Json("inf") : Json(lambda2) };
  out["config_echo"] = echo;
  out["version"] = kVersion;
  return out;
}

Json
cmd_oracle(const RunConfig& c)
{
  if (!c.oracle)
    throw ValidationError("config: oracle section is required");
  const OracleSpec& o = *c.oracle;
  if (o.kind == "gaussian") {
    if (o.lambda.size() != 2)
      throw ValidationError("config: the Gaussian oracle needs two lambda values");
    return gaussian_oracle_report(o.rho, o.lambda[0], o.lambda[1]);
  }
  if (!o.distribution)
    throw ValidationError("config: oracle.distribution is required for kind " + o.kind);
  const FiniteSupportDistribution& dist = *o.distribution;
  int d = dist.dimension();
  PatternSet patterns = make_patterns(c, d);
  Functional f = make_functional(c, d);
  ShiftSpec shifts = make_shifts(c, patterns);
  auto lambda = oracle_lambda(o, patterns.size());

  Json out;
  out["kind"] = o.kind;
  out["variance_a"] = variance_of(dist, f);
  std::vector<MarginalTable> alpha;
  if (o.kind == "exact") {
    AlphaSolution sol = exact_minimize(dist, patterns, shifts, lambda, f);
    out["L"] = sol.objective;
    out["residual"] = sol.residual;
    out["constants"] = doubles(sol.constants);
    alpha = sol.alpha;
  } else if (o.kind == "gradient_descent") {
    auto iterates = gradient_descent_alpha(dist, patterns, shifts, lambda, f, o.M, o.eta);
    double best = exact_minimize(dist, patterns, shifts, lambda, f).objective;
    double kappa = condition_number(dist, patterns, shifts, lambda);
    double var_a = variance_of(dist, f);
    Json objective = Json::array(), bound = Json::array();
    for (std::size_t m = 0; m < iterates.size(); ++m) {
      objective.push_back(iterates[m].objective);
      bound.push_back(descent_gap_bound(kappa, static_cast<int>(m), var_a));
    }
    out["L"] = best;
    out["kappa"] = kappa;
    out["objective"] = objective;
    out["gap_bound"] = bound;
    alpha = iterates.back().alpha;
  } else if (o.kind == "chains") {
    alpha = approx_influence_chains(dist, patterns, shifts, lambda, f, o.M, o.eta, o.max_chains);
    out["L"] = objective_value(dist, patterns, shifts, lambda, f, alpha);
  } else if (o.kind == "product") {
    if (shifts.mode() != ShiftMode::MCAR)
      throw ValidationError("the product closed form needs MCAR");
    alpha = product_case_alpha(dist, patterns, lambda, f);
    out["L"] = objective_value(dist, patterns, shifts, lambda, f, alpha);
  } else if (o.kind == "monotone_mcar") {
    if (shifts.mode() != ShiftMode::MCAR)
      throw ValidationError("the monotone MCAR closed form needs MCAR");
    alpha = monotone_mcar_alpha(dist, patterns, lambda, f);
    out["L"] = objective_value(dist, patterns, shifts, lambda, f, alpha);
    Json w = Json::array();
    for (const auto& row : monotone_mcar_weights(patterns, lambda).w)
      w.push_back(doubles(row));
    out["weights"] = w;
  } else {
    auto sol = monotone_shifted_alpha(dist, patterns, lambda, shifts, f);
    alpha = sol.alpha;
    out["L"] = objective_value(dist, patterns, shifts, lambda, f, alpha);
    out["theta"] = doubles(sol.theta);
    out["fallback"] = sol.fallback;
  }
  out["alpha"] = tables_json(alpha);

  Json echo = base_echo(c, patterns);
  echo["oracle"] = c.raw["oracle"];
  out["config_echo"] = echo;
  out["version"] = kVersion;
  return out;
}

Json
summary_json(const MonteCarloSummary& s)
{
  Json j;
  j["estimator"] = s.estimator;
  j["generator"] = s.generator;
  j["n"] = s.n;
  j["replications"] = s.replications;
  j["theta_true"] = s.theta_true;
  j["variance_a"] = s.variance_a;
  j["oracle_target"] = s.oracle_target ? Json(*s.oracle_target) : Json(nullptr);
  j["mean_estimate"] = s.mean_estimate;
  j["bias"] = s.bias;
  j["bias_se"] = s.bias_se;
  j["n_mse"] = s.n_mse;
  j["n_mse_se"] = s.n_mse_se;
  j["coverage"] = s.coverage ? Json(*s.coverage) : Json(nullptr);
  j["complete_case"] = { { "n_mse", s.complete_case_n_mse }, { "n_mse_se", s.complete_case_n_mse_se } };
  j["paired_difference"] = { { "n_mse", s.paired_difference }, { "se", s.paired_difference_se } };
  j["wall_clock_seconds"] = s.wall_clock_seconds;
  j["estimates"] = doubles(s.estimates);
  j["complete_case_estimates"] = doubles(s.complete_case_estimates);
  j["warnings"] = strings(s.warnings);
  return j;
}

Json
cmd_simulate(const RunConfig& c)
{
  if (!c.scenario)
    throw ValidationError("config: scenario section is required");
  const ScenarioSpec& sp = *c.scenario;
  Scenario s;
  s.generator = sp.generator;
  s.rho = sp.rho;
  s.dist = sp.distribution;
  int d = scenario_dimension(s);
  s.patterns = make_patterns(c, d);
  s.lambda = sp.lambda;
  s.shifts = make_shifts(c, s.patterns);
  s.functional = make_functional(c, d);
  s.n = sp.n;
  s.replications = sp.replications;
  s.seed = sp.seed;
  validate_scenario(s);

  McConfig mc;
  EstimatorConfig base = default_config(s.n, d, s.patterns.size());
  base.seed = sp.seed;
  mc.crossfit = apply(c.estimator, base);
  mc.ustat = c.ustat;
  mc.alpha = c.alpha;
  MonteCarloSummary summary = run_mc(s, sp.estimator, mc);

  Json out = summary_json(summary);
  Json echo = base_echo(c, s.patterns);
  echo["scenario"] = c.raw["scenario"];
  echo["estimator"] = to_json(*mc.crossfit);
  echo["ustat"] = to_json(mc.ustat);
  out["config_echo"] = echo;
  out["version"] = kVersion;
  return out;
}

int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Mean functional estimation from fused complete and incomplete data", "fuse-mean" };
  app.require_subcommand(1);
  std::string config_path;
  std::string out_path;
  std::size_t threads = 0;
  std::string oracle_kind;
  double rho = 0.0;
  std::vector<std::string> lambda_args;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "JSON config file");
    if (config_required)
      opt->required();
    sub->add_option("--threads", threads, "Worker thread cap");
    sub->add_option("--out", out_path, "Write the report to this file");
  };
  auto* est = app.add_subcommand("estimate", "Cross-fitted estimate with variance and interval");
  add_common(est, true);
  auto* ust = app.add_subcommand("ustat", "Direct U-statistic estimate");
  add_common(ust, true);
  auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(sim, true);
  auto* ora = app.add_subcommand("oracle", "Closed-form and exact oracle values");
  add_common(ora, false);
  ora->add_option("kind", oracle_kind, "gaussian (other kinds via --config)");
  ora->add_option("--rho", rho, "Correlation for the Gaussian oracle");
  ora->add_option("--lambda", lambda_args, "Two sample-size ratios; 'inf' allowed")->expected(2);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << write_json(Json{ { "error", error_json("usage", e.what()) } });
    return 1;
  }

  try {
    Json report;
    std::optional<RunConfig> config;
    if (!config_path.empty())
      config = load_config(config_path);
    std::size_t cap = threads;
    if (cap == 0 && config && config->threads)
      cap = *config->threads;
    if (cap > 0)
      set_default_threads(cap);

    if (est->parsed()) {
      report = cmd_estimate(*config);
    } else if (ust->parsed()) {
      report = cmd_ustat(*config);
    } else if (sim->parsed()) {
      report = cmd_simulate(*config);
    } else {
      if (!oracle_kind.empty() && oracle_kind != "gaussian")
        throw ValidationError("unknown oracle kind '" + oracle_kind + "'; use --config for finite-support oracles");
      if (oracle_kind == "gaussian") {
        if (lambda_args.size() != 2)
          throw ValidationError("oracle gaussian needs --lambda l1 l2");
        report = gaussian_oracle_report(rho, parse_lambda_arg(lambda_args[0]), parse_lambda_arg(lambda_args[1]));
      } else {
        if (!config)
          throw ValidationError("oracle needs a kind or --config");
        report = cmd_oracle(*config);
      }
    }

    std::string text = write_json(report);
    std::string target = out_path;
    if (target.empty() && config && config->output)
      target = *config->output;
    if (target.empty()) {
      out << text;
    } else {
      std::ofstream file(target, std::ios::binary);
      if (!file)
        throw ValidationError("cannot write output file: " + target);
      file << text;
    }
    return 0;
  } catch (const expr::ParseError& e) {
    Json j = error_json("parse", e.what());
    j["offset"] = e.offset();
    err << write_json(Json{ { "error", j } });
    return 1;
  } catch (const expr::EvalError& e) {
    Json j = error_json("evaluation", e.what());
    j["subexpression"] = e.subexpression();
    err << write_json(Json{ { "error", j } });
    return 2;
  } catch (const ValidationError& e) {
    err << write_json(Json{ { "error", error_json("validation", e.what()) } });
    return 1;
  } catch (const NumericalError& e) {
    err << write_json(Json{ { "error", error_json("numerical", e.what()) } });
    return 2;
  }
}

} // namespace fusemean::cli
