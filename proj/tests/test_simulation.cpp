#include "fusemean/errors.hpp"
#include "fusemean/oracles.hpp"
#include "fusemean/simulation.hpp"

#include <doctest.h>

#include <cmath>

using namespace fusemean;

namespace {

Functional
fn(std::function<double(std::span<const double>)> f)
{
  Functional out;
  out.a = std::move(f);
  return out;
}

Scenario
gaussian(double rho, std::size_t n)
{
  Scenario s;
  s.generator = Generator::BIVARIATE_GAUSSIAN;
  s.rho = rho;
  s.lambda = { 1.0, 1.0 };
  s.functional = fn([](std::span<const double> x) { return x[0] * x[1]; });
  s.functional.source = "x1*x2";
  s.n = n;
  s.seed = 7;
  return s;
}

Scenario
coins(std::size_t n)
{
  Scenario s;
  s.generator = Generator::PRODUCT_FINITE;
  s.dist = FiniteSupportDistribution::product({ { 0, 1 }, { 0, 1 } }, { { 0.5, 0.5 }, { 0.5, 0.5 } });
  s.lambda = { 1.0, 0.5 };
  s.functional = fn([](std::span<const double> x) { return x[0] * x[1]; });
  s.n = n;
  s.seed = 11;
  return s;
}

} // namespace

TEST_CASE("independent Gaussian coordinates are uncorrelated")
{
  auto s = gaussian(0.0, 20000);
  auto data = generate(s, 0);
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  double n = static_cast<double>(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    double x = data.complete(i, 0), y = data.complete(i, 1);
    sx += x;
    sy += y;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  double cov = sxy / n - sx / n * sy / n;
  double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::fabs(corr) < 3 / std::sqrt(n));
  CHECK(data.incomplete.at({ 0 }).rows() == 20000);
  CHECK(std::fabs(sxx / n - 1) < 0.05);

  auto t = gaussian(0.5, 20000);
  auto d2 = generate(t, 1);
  double m = 0;
  for (std::size_t i = 0; i < d2.n(); ++i)
    m += d2.complete(i, 0) * d2.complete(i, 1);
  CHECK(std::fabs(m / n - 0.5) < 4 * std::sqrt(1.25 / n));
}

TEST_CASE("fair coin frequencies and tilting")
{
  auto s = coins(40000);
  auto data = generate(s, 3);
  double counts[2][2] = {};
  for (std::size_t i = 0; i < data.n(); ++i)
    counts[static_cast<int>(data.complete(i, 0))][static_cast<int>(data.complete(i, 1))] += 1;
  for (auto& row : counts)
    for (double c : row)
      CHECK(std::fabs(c / 40000 - 0.25) < 4 * std::sqrt(0.1875 / 40000));
  CHECK(pattern_sizes(s) == std::vector<std::size_t>{ 40000, 20000 });

  // r(x) = 1 + 2 x on {0, 1}: tilted probabilities 1/4 and 3/4.
  s.shifts = ShiftSpec::shifted({ { { 0 }, [](std::span<const double> x) { return 1.0 + 2.0 * x[0]; } } });
  auto tilted = generate(s, 3);
  const auto& block = tilted.incomplete.at({ 0 });
  double ones = 0;
  for (std::size_t i = 0; i < block.rows(); ++i)
    ones += block(i, 0);
  double n = static_cast<double>(block.rows());
  CHECK(std::fabs(ones / n - 0.75) < 4 * std::sqrt(0.1875 / n));
}

TEST_CASE("generation is deterministic per seed and replication")
{
  auto s = gaussian(0.3, 300);
  auto a = generate(s, 5);
  auto b = generate(s, 5);
  CHECK(a.complete == b.complete);
  CHECK(a.incomplete == b.incomplete);
  CHECK_FALSE(generate(s, 6).complete == a.complete);
  s.seed += 1;
  CHECK_FALSE(generate(s, 5).complete == a.complete);

  auto c = coins(100);
  CHECK(generate(c, 2).incomplete == generate(c, 2).incomplete);
}

TEST_CASE("scenario validation")
{
  auto s = gaussian(0.5, 100);
  s.shifts = ShiftSpec::shifted({ { { 0 }, [](std::span<const double>) { return 2.0; } } });
  CHECK_THROWS_WITH_AS(generate(s, 0), "shifted sampling is unsupported for Gaussian generators", ValidationError);
  auto t = gaussian(1.0, 100);
  CHECK_THROWS_AS(validate_scenario(t), ValidationError);
  auto u = gaussian(0.5, 100);
  u.lambda = { 1.0 };
  CHECK_THROWS_AS(validate_scenario(u), ValidationError);
  u.lambda = { 1.0, 0.001 };
  CHECK_THROWS_AS(validate_scenario(u), ValidationError);
  auto v = coins(100);
  v.dist.reset();
  CHECK_THROWS_AS(validate_scenario(v), ValidationError);
  auto w = gaussian(0.5, 100);
  w.replications = 1;
  CHECK_THROWS_AS(run_mc(w, EstimatorKind::COMPLETE_CASE, {}), ValidationError);
}

TEST_CASE("Gauss-Hermite moments")
{
  auto q = gauss_hermite(40);
  double m[9] = {};
  for (std::size_t i = 0; i < q.nodes.size(); ++i)
    for (int k = 0; k < 9; ++k)
      m[k] += q.weights[i] * std::pow(q.nodes[i], k);
  CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::fabs(m[1]) < 1e-13);
  CHECK(m[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(m[3]) < 1e-12);
  CHECK(m[4] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m[6] == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(m[8] == doctest::Approx(105.0).epsilon(1e-11));
  auto one = gauss_hermite(1);
  CHECK(one.nodes[0] == doctest::Approx(0.0));
  CHECK(one.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("true values")
{
  auto s = gaussian(0.5, 100);
  CHECK(true_theta(s) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(true_variance(s) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(*oracle_target(s) == doctest::Approx(0.8055555555555556).epsilon(1e-12));

  Scenario e;
  e.generator = Generator::TRIVARIATE_STANDARD_GAUSSIAN;
  e.patterns = PatternSet(3, { { 0, 1 }, { 0, 2 } });
  e.lambda = { 1.0, 1.0 };
  e.functional = fn([](std::span<const double> x) { return std::pow(x[0] - (x[0] + x[1] + x[2]) / 3, 3); });
  e.n = 100;
  CHECK(std::fabs(true_theta(e)) < 1e-12);
  // u = (2 x1 - x2 - x3)/3 has variance 2/3, so E u^6 = 15 (2/3)^3.
  CHECK(true_variance(e) == doctest::Approx(15.0 * 8.0 / 27.0).epsilon(1e-12));
  CHECK_FALSE(oracle_target(e).has_value());

  auto c = coins(100);
  CHECK(true_theta(c) == doctest::Approx(0.25));
  CHECK(true_variance(c) == doctest::Approx(0.1875));
  CHECK(*oracle_target(c) == doctest::Approx(exact_minimize(*c.dist, c.patterns, c.shifts, { 1.0, 0.5 }, c.functional).objective));
}

TEST_CASE("complete-case Monte Carlo recovers Var a")
{
  auto s = coins(400);
  s.replications = 400;
  auto out = run_mc(s, EstimatorKind::COMPLETE_CASE, {});
  CHECK(std::fabs(out.n_mse - 0.1875) < 4 * out.n_mse_se);
  CHECK(out.n_mse == out.complete_case_n_mse);
  CHECK(out.paired_difference == 0.0);
  REQUIRE(out.coverage.has_value());
  CHECK(*out.coverage >= 0.0);
  CHECK(*out.coverage <= 1.0);
  CHECK(out.estimates.size() == 400);
  CHECK(std::fabs(out.bias) < 4 * out.bias_se);
}

TEST_CASE("USTAT with M = 0 reproduces the complete-case estimates")
{
  auto s = coins(50);
  s.replications = 20;
  McConfig c;
  c.ustat.M = 0;
  auto u = run_mc(s, EstimatorKind::USTAT, c);
  auto cc = run_mc(s, EstimatorKind::COMPLETE_CASE, c);
  CHECK(u.estimates == cc.estimates);
  CHECK(u.complete_case_estimates == cc.estimates);
  CHECK_FALSE(u.coverage.has_value());
}

TEST_CASE("results do not depend on the thread count")
{
  auto s = gaussian(0.5, 200);
  s.replications = 6;
  McConfig one, many;
  one.threads = 1;
  many.threads = 4;
  auto a = run_mc(s, EstimatorKind::CROSSFIT, one);
  auto b = run_mc(s, EstimatorKind::CROSSFIT, many);
  CHECK(a.estimates == b.estimates);
  CHECK(a.n_mse == b.n_mse);
  CHECK(a.coverage == b.coverage);
}

TEST_CASE("jackknife standard error of a mean")
{
  std::vector<double> v{ 1.0, 2.0, 4.0, 7.0 };
  // For the mean the jackknife equals the usual s / sqrt(R).
  double mean = 3.5, ss = 0;
  for (double x : v)
    ss += (x - mean) * (x - mean);
  CHECK(jackknife_mean_se(v) == doctest::Approx(std::sqrt(ss / 3 / 4)).epsilon(1e-14));
  CHECK_THROWS_AS(jackknife_mean_se({ 1.0 }), ValidationError);
}

TEST_CASE("Monte Carlo conditional means")
{
  auto a = fn([](std::span<const double> x) { return x[0] + x[1] * x[1]; });
  auto m = mc_conditional_mean(a, 2, 0, 0.7, 20000, 3);
  CHECK(std::fabs(m.mean - 1.7) < 4 * m.se);
  auto again = mc_conditional_mean(a, 2, 0, 0.7, 20000, 3);
  CHECK(again.mean == m.mean);
  CHECK_THROWS_AS(mc_conditional_mean(a, 2, 2, 0.0, 10, 1), ValidationError);
}
