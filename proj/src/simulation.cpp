#include "fusemean/simulation.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/expr.hpp"
#include "fusemean/oracles.hpp"
#include "fusemean/parallel.hpp"
#include "fusemean/random.hpp"
#include "fusemean/summation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace fusemean {

std::string
generator_name(Generator g)
{
  switch (g) {
    case Generator::BIVARIATE_GAUSSIAN:
      return "BIVARIATE_GAUSSIAN";
    case Generator::TRIVARIATE_STANDARD_GAUSSIAN:
      return "TRIVARIATE_STANDARD_GAUSSIAN";
    case Generator::PRODUCT_FINITE:
      return "PRODUCT_FINITE";
    case Generator::CUSTOM_FINITE:
      return "CUSTOM_FINITE";
  }
  return "UNKNOWN";
}

std::string
estimator_name(EstimatorKind k)
{
  switch (k) {
    case EstimatorKind::CROSSFIT:
      return "CROSSFIT";
    case EstimatorKind::USTAT:
      return "USTAT";
    case EstimatorKind::COMPLETE_CASE:
      return "COMPLETE_CASE";
  }
  return "UNKNOWN";
}

namespace {

bool
is_finite_generator(Generator g)
{
  return g == Generator::PRODUCT_FINITE || g == Generator::CUSTOM_FINITE;
}

//! Index drawn from cumulative weights `cdf` (last entry is the total).
std::size_t
draw(const std::vector<double>& cdf, CounterRng& rng)
{
  double u = rng.uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end())
    --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

std::vector<double>
cumulative(const std::vector<double>& weights)
{
  std::vector<double> cdf(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i];
    cdf[i] = total;
  }
  return cdf;
}

void
gaussian_row(const Scenario& s, CounterRng& rng, std::vector<double>& x)
{
  if (s.generator == Generator::BIVARIATE_GAUSSIAN) {
    double z1 = rng.normal();
    double z2 = rng.normal();
    x = { z1, s.rho * z1 + std::sqrt(1.0 - s.rho * s.rho) * z2 };
  } else {
    x = { rng.normal(), rng.normal(), rng.normal() };
  }
}

//! E[g(X)] under a Gaussian generator by the tensor Gauss-Hermite rule.
template<typename G>
double
gaussian_expectation(const Scenario& s, G&& g)
{
  static const Quadrature q = gauss_hermite(40);
  std::size_t m = q.nodes.size();
  std::vector<double> terms;
  std::vector<double> x;
  if (s.generator == Generator::BIVARIATE_GAUSSIAN) {
    double c = std::sqrt(1.0 - s.rho * s.rho);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        x = { q.nodes[i], s.rho * q.nodes[i] + c * q.nodes[j] };
        terms.push_back(q.weights[i] * q.weights[j] * g(x));
      }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k) {
          x = { q.nodes[i], q.nodes[j], q.nodes[k] };
          terms.push_back(q.weights[i] * q.weights[j] * q.weights[k] * g(x));
        }
  }
  return pairwise_sum(terms);
}

std::vector<double>
realized_lambda(const Scenario& s)
{
  auto sizes = pattern_sizes(s);
  std::vector<double> out;
  for (std::size_t k : sizes)
    out.push_back(static_cast<double>(k) / static_cast<double>(s.n));
  return out;
}

bool
is_product_functional(const Functional& f)
{
  if (f.source.empty())
    return false;
  try {
    return expr::parse(f.source, 2) == expr::parse("x1*x2", 2);
  } catch (const std::exception&) {
    return false;
  }
}

} // namespace

int
scenario_dimension(const Scenario& s)
{
  switch (s.generator) {
    case Generator::BIVARIATE_GAUSSIAN:
      return 2;
    case Generator::TRIVARIATE_STANDARD_GAUSSIAN:
      return 3;
    default:
      if (!s.dist)
        throw ValidationError("finite generator needs a distribution");
      return s.dist->dimension();
  }
}

void
validate_scenario(const Scenario& s)
{
  if (is_finite_generator(s.generator) && !s.dist)
    throw ValidationError("finite generator needs a distribution");
  if (s.generator == Generator::PRODUCT_FINITE && !s.dist->is_product())
    throw ValidationError("PRODUCT_FINITE distribution does not factorize");
  if (s.generator == Generator::BIVARIATE_GAUSSIAN && !(std::fabs(s.rho) < 1.0))
    throw ValidationError("rho must lie in (-1, 1)");
  if (scenario_dimension(s) != s.patterns.dimension())
    throw ValidationError("generator dimension does not match the pattern set");
  if (!is_finite_generator(s.generator) && s.shifts.mode() == ShiftMode::SHIFTED)
    throw ValidationError("shifted sampling is unsupported for Gaussian generators");
  if (s.lambda.size() != s.patterns.size())
    throw ValidationError("one lambda per pattern is required");
  if (s.n < 2)
    throw ValidationError("n must be at least 2");
  if (!s.functional.a)
    throw ValidationError("functional is not set");
  for (double l : s.lambda)
    if (!(l > 0.0) || !std::isfinite(l))
      throw ValidationError("lambda must be positive and finite");
  for (std::size_t k : pattern_sizes(s))
    if (k < 1)
      throw ValidationError("round(lambda n) must be at least 1");
}

std::vector<std::size_t>
pattern_sizes(const Scenario& s)
{
  std::vector<std::size_t> out;
  for (double l : s.lambda)
    out.push_back(static_cast<std::size_t>(std::llround(l * static_cast<double>(s.n))));
  return out;
}

FusedDataset
generate(const Scenario& s, std::uint64_t replication)
{
  validate_scenario(s);
  int d = scenario_dimension(s);
  auto sizes = pattern_sizes(s);
  FusedDataset data;
  data.complete = Matrix(s.n, static_cast<std::size_t>(d));
  std::vector<double> x;

  if (is_finite_generator(s.generator)) {
    const FiniteSupportDistribution& dist = *s.dist;
    auto cdf = cumulative(dist.probabilities());
    CounterRng rng(s.seed, stream_id(replication, 0));
    for (std::size_t i = 0; i < s.n; ++i) {
      auto p = dist.point(draw(cdf, rng));
      std::copy(p.begin(), p.end(), data.complete.row(i).begin());
    }
    for (std::size_t k = 0; k < s.patterns.size(); ++k) {
      const Pattern& pat = s.patterns[k];
      MarginalIndex idx(dist, pat);
      auto rbar = normalized_shift(idx, s.shifts);
      std::vector<double> w(idx.atoms());
      for (std::size_t u = 0; u < w.size(); ++u)
        w[u] = idx.mass(u) * rbar[u];
      auto mcdf = cumulative(w);
      CounterRng prng(s.seed, stream_id(replication, 1 + k));
      Matrix block(sizes[k], pat.size());
      for (std::size_t i = 0; i < sizes[k]; ++i) {
        const auto& atom = idx.atom(draw(mcdf, prng));
        std::copy(atom.begin(), atom.end(), block.row(i).begin());
      }
      data.incomplete.emplace(pat, std::move(block));
    }
    return data;
  }

  CounterRng rng(s.seed, stream_id(replication, 0));
  for (std::size_t i = 0; i < s.n; ++i) {
    gaussian_row(s, rng, x);
    std::copy(x.begin(), x.end(), data.complete.row(i).begin());
  }
  std::vector<double> x_s;
  for (std::size_t k = 0; k < s.patterns.size(); ++k) {
    const Pattern& pat = s.patterns[k];
    CounterRng prng(s.seed, stream_id(replication, 1 + k));
    Matrix block(sizes[k], pat.size());
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      gaussian_row(s, prng, x);
      project(x, pat, x_s);
      std::copy(x_s.begin(), x_s.end(), block.row(i).begin());
    }
    data.incomplete.emplace(pat, std::move(block));
  }
  return data;
}

Quadrature
gauss_hermite(int points)
{
  if (points < 1)
    throw ValidationError("quadrature needs at least one point");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
  // polynomials: zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(points, points);
  for (int k = 1; k < points; ++k) {
    J(k - 1, k) = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = J(k - 1, k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  Quadrature q;
  for (int i = 0; i < points; ++i) {
    q.nodes.push_back(eig.eigenvalues()(i));
    double v = eig.eigenvectors()(0, i);
    q.weights.push_back(v * v);
  }
  return q;
}

double
true_theta(const Scenario& s)
{
  validate_scenario(s);
  if (is_finite_generator(s.generator)) {
    std::vector<double> a(s.dist->size());
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] = s.functional(s.dist->point(i));
    return s.dist->expectation(a);
  }
  return gaussian_expectation(s, [&](const std::vector<double>& x) { return s.functional(x); });
}

double
true_variance(const Scenario& s)
{
  validate_scenario(s);
  if (is_finite_generator(s.generator))
    return variance_of(*s.dist, s.functional);
  double theta = true_theta(s);
  return gaussian_expectation(s, [&](const std::vector<double>& x) {
    double v = s.functional(x) - theta;
    return v * v;
  });
}

std::optional<double>
oracle_target(const Scenario& s)
{
  validate_scenario(s);
  auto lambda = realized_lambda(s);
  if (is_finite_generator(s.generator))
    return exact_minimize(*s.dist, s.patterns, s.shifts, lambda, s.functional).objective;
  if (s.generator == Generator::BIVARIATE_GAUSSIAN && s.patterns.size() == 2 &&
      is_product_functional(s.functional)) {
    auto i1 = s.patterns.index_of({ 0 });
    auto i2 = s.patterns.index_of({ 1 });
    if (i1 && i2)
      return gaussian_bivariate_oracle(s.rho, lambda[*i1], lambda[*i2]).L;
  }
  return std::nullopt;
}

double
jackknife_mean_se(const std::vector<double>& values)
{
  std::size_t R = values.size();
  if (R < 2)
    throw ValidationError("jackknife needs at least two values");
  double total = pairwise_sum(values);
  std::vector<double> loo(R);
  for (std::size_t i = 0; i < R; ++i)
    loo[i] = (total - values[i]) / static_cast<double>(R - 1);
  double mean = pairwise_mean(loo);
  std::vector<double> sq(R);
  for (std::size_t i = 0; i < R; ++i)
    sq[i] = (loo[i] - mean) * (loo[i] - mean);
  return std::sqrt(static_cast<double>(R - 1) / static_cast<double>(R) * pairwise_sum(sq));
}

MonteCarloSummary
run_mc(const Scenario& s, EstimatorKind estimator, const McConfig& config)
{
  validate_scenario(s);
  if (s.replications < 2)
    throw ValidationError("Monte Carlo needs at least two replications");
  auto start = std::chrono::steady_clock::now();

  std::size_t R = s.replications;
  double theta = true_theta(s);
  double z = normal_upper_quantile(config.alpha / 2.0);
  std::vector<double> est(R), cc(R);
  std::vector<char> covered(R, 0);
  std::vector<std::vector<std::string>> warnings(R);

  parallel_for(
    R,
    [&](std::size_t r) {
      FusedDataset data = generate(s, r);
      cc[r] = complete_case_mean(data, s.functional);
      switch (estimator) {
        case EstimatorKind::COMPLETE_CASE: {
          std::vector<double> sq(data.n());
          for (std::size_t i = 0; i < data.n(); ++i) {
            double v = s.functional(data.complete.row(i)) - cc[r];
            sq[i] = v * v;
          }
          double se = std::sqrt(pairwise_mean(sq) / static_cast<double>(data.n()));
          est[r] = cc[r];
          covered[r] = std::fabs(cc[r] - theta) <= z * se;
          break;
        }
        case EstimatorKind::CROSSFIT: {
          EstimatorConfig ec = config.crossfit ? *config.crossfit : default_config(data, s.patterns);
          ec.seed = (config.crossfit ? config.crossfit->seed : s.seed) + r;
          auto rep = estimate(data, s.patterns, s.shifts, s.functional, ec, config.alpha);
          est[r] = rep.theta_hat;
          covered[r] = rep.ci.lower <= theta && theta <= rep.ci.upper;
          warnings[r] = rep.diagnostics.warnings;
          break;
        }
        case EstimatorKind::USTAT: {
          UStatConfig uc = config.ustat;
          uc.seed += r;
          auto res = ustat_estimate(data, s.patterns, s.functional, uc);
          est[r] = res.theta;
          warnings[r] = res.warnings;
          break;
        }
      }
    },
    config.threads);

  MonteCarloSummary out;
  out.estimator = estimator_name(estimator);
  out.generator = generator_name(s.generator);
  out.n = s.n;
  out.replications = R;
  out.theta_true = theta;
  out.variance_a = true_variance(s);
  out.oracle_target = oracle_target(s);

  double n = static_cast<double>(s.n);
  std::vector<double> err(R), se_est(R), se_cc(R), diff(R);
  for (std::size_t r = 0; r < R; ++r) {
    err[r] = est[r] - theta;
    se_est[r] = n * err[r] * err[r];
    se_cc[r] = n * (cc[r] - theta) * (cc[r] - theta);
    diff[r] = se_est[r] - se_cc[r];
  }
  out.mean_estimate = pairwise_mean(est);
  out.bias = pairwise_mean(err);
  out.bias_se = jackknife_mean_se(err);
  out.n_mse = pairwise_mean(se_est);
  out.n_mse_se = jackknife_mean_se(se_est);
  out.complete_case_n_mse = pairwise_mean(se_cc);
  out.complete_case_n_mse_se = jackknife_mean_se(se_cc);
  out.paired_difference = pairwise_mean(diff);
  out.paired_difference_se = jackknife_mean_se(diff);
  if (estimator != EstimatorKind::USTAT) {
    std::size_t hits = 0;
    for (char c : covered)
      hits += c ? 1 : 0;
    out.coverage = static_cast<double>(hits) / static_cast<double>(R);
  }
  std::set<std::string> seen;
  for (const auto& w : warnings)
    for (const auto& msg : w)
      if (seen.insert(msg).second)
        out.warnings.push_back(msg);
  out.estimates = std::move(est);
  out.complete_case_estimates = std::move(cc);
  out.wall_clock_seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

McMean
mc_conditional_mean(const Functional& functional,
                    int d,
                    int coordinate,
                    double value,
                    std::size_t samples,
                    std::uint64_t seed)
{
  if (d < 1 || coordinate < 0 || coordinate >= d)
    throw ValidationError("coordinate out of range");
  if (samples < 2)
    throw ValidationError("need at least two samples");
  CounterRng rng(seed, 0);
  std::vector<double> values(samples);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < samples; ++i) {
    for (int j = 0; j < d; ++j)
      x[static_cast<std::size_t>(j)] = j == coordinate ? value : rng.normal();
    values[i] = functional(x);
  }
  McMean out;
  out.mean = pairwise_mean(values);
  std::vector<double> sq(samples);
  for (std::size_t i = 0; i < samples; ++i)
    sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
  out.se = std::sqrt(pairwise_sum(sq) / static_cast<double>(samples - 1) / static_cast<double>(samples));
  return out;
}

} // namespace fusemean
