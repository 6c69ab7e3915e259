#include "fusemean/crossfit.hpp"
#include "fusemean/errors.hpp"
#include "fusemean/influence.hpp"
#include "fusemean/random.hpp"
#include "fusemean/ustat.hpp"
#include "support/ustat_reference.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace fusemean;

namespace {

FusedDataset
cube_data(std::size_t n, const PatternSet& p, std::vector<std::size_t> sizes, std::uint64_t seed)
{
  CounterRng rng(seed, 0);
  auto d = static_cast<std::size_t>(p.dimension());
  FusedDataset data;
  data.complete = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      data.complete(i, j) = rng.uniform();
  for (std::size_t k = 0; k < p.size(); ++k) {
    Matrix block(sizes[k], p[k].size());
    for (std::size_t i = 0; i < sizes[k]; ++i)
      for (std::size_t j = 0; j < p[k].size(); ++j)
        block(i, j) = rng.uniform();
    data.incomplete[p[k]] = block;
  }
  return data;
}

Functional
fn(std::function<double(std::span<const double>)> f)
{
  Functional out;
  out.a = std::move(f);
  return out;
}

bool
close(double x, double y, double rel)
{
  return std::fabs(x - y) <= rel * std::max(1.0, std::max(std::fabs(x), std::fabs(y)));
}

} // namespace

TEST_CASE("falling factorial")
{
  CHECK(falling_factorial(5, 2) == 20);
  CHECK(falling_factorial(9, 0) == 1);
  CHECK(falling_factorial(0, 0) == 1);
  CHECK(falling_factorial(7, 7) == 5040);
  CHECK_THROWS_AS(falling_factorial(3, 4), ValidationError);
  CHECK_THROWS_AS(falling_factorial(100, 40), NumericalError);
}

TEST_CASE("chain weights")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = cube_data(10, p, { 10, 30 }, 1);
  CHECK(chain_weight(data, p, {}) == 1.0);
  CHECK(chain_weight(data, p, { 0 }) == doctest::Approx(0.5));
  CHECK(chain_weight(data, p, { 1 }) == doctest::Approx(0.75));
  CHECK(chain_weight(data, p, { 0, 1, 0 }) == doctest::Approx(0.5 * 0.75 * 0.5));
}

TEST_CASE("M = 0 is the complete-case mean")
{
  PatternSet p(3, { { 0 }, { 1, 2 } });
  auto data = cube_data(40, p, { 20, 30 }, 2);
  auto a = fn([](std::span<const double> x) { return x[0] * x[1] + x[2]; });
  UStatConfig c;
  auto r = ustat_estimate(data, p, a, c);
  CHECK(r.theta == complete_case_mean(data, a));
  CHECK(r.warnings.empty());
}

TEST_CASE("small example against explicit enumeration")
{
  PatternSet p(2, { { 0 } });
  auto data = cube_data(3, p, { 2 }, 3);
  auto a = fn([](std::span<const double> x) { return x[0] + 2 * x[1]; });
  UStatConfig c;
  c.M = 1;
  c.h = 0.8;
  auto r = ustat_estimate(data, p, a, c);
  CHECK(r.tuples_per_term[1] == 6);
  CHECK(close(r.theta, testing::reference_theta(data, p, a, 1, 0.8, 1.0), 1e-12));
}

TEST_CASE("random small instances against explicit enumeration")
{
  CounterRng rng(5, 5);
  for (int t = 0; t < 25; ++t) {
    int d = 2 + static_cast<int>(rng.bounded(2));
    std::vector<Pattern> pats = d == 2 ? std::vector<Pattern>{ { 0 }, { 1 } }
                                       : std::vector<Pattern>{ { 0 }, { 1, 2 }, { 0, 2 } };
    PatternSet p(d, pats);
    std::size_t n = 4 + rng.bounded(5);
    std::vector<std::size_t> sizes;
    for (std::size_t k = 0; k < p.size(); ++k)
      sizes.push_back(1 + rng.bounded(8));
    auto data = cube_data(n, p, sizes, 50 + t);
    auto a = fn([](std::span<const double> x) { return std::sin(3 * x[0]) + x[1] * x[1]; });
    UStatConfig c;
    c.M = 1 + static_cast<int>(rng.bounded(2));
    c.h = 0.3 + 0.7 * rng.uniform();
    auto r = ustat_estimate(data, p, a, c);
    double ref = testing::reference_theta(data, p, a, c.M, c.h, 1.0 / static_cast<double>(p.size()));
    CHECK(close(r.theta, ref, 1e-12));
  }
}

TEST_CASE("exact enumeration ignores row order")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = cube_data(9, p, { 5, 7 }, 8);
  auto a = fn([](std::span<const double> x) { return x[0] - x[1] * x[0]; });
  UStatConfig c;
  c.M = 2;
  c.h = 0.7;
  double base = ustat_estimate(data, p, a, c).theta;
  CounterRng rng(1, 2);
  for (int t = 0; t < 5; ++t) {
    auto order = shuffled_indices(9, rng);
    auto perm = data;
    perm.complete = data.complete.select_rows(order);
    CHECK(close(ustat_estimate(perm, p, a, c).theta, base, 1e-12));
  }
}

TEST_CASE("subsampling")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = cube_data(30, p, { 30, 30 }, 9);
  auto a = fn([](std::span<const double> x) { return x[0] * x[1]; });
  UStatConfig c;
  c.M = 2;
  c.h = 0.6;
  auto exact = ustat_estimate(data, p, a, c);
  c.enumeration = Enumeration::SUBSAMPLED;
  c.budget = falling_factorial(30, 3);
  auto full = ustat_estimate(data, p, a, c);
  CHECK(full.theta == exact.theta);

  c.budget = 5000;
  c.seed = 4;
  auto sub = ustat_estimate(data, p, a, c);
  auto again = ustat_estimate(data, p, a, c);
  CHECK(sub.theta == again.theta);
  CHECK(sub.tuples_per_term[1] == 870);
  CHECK(sub.tuples_per_term[2] == 5000);
  c.seed = 5;
  CHECK(ustat_estimate(data, p, a, c).theta != sub.theta);
  CHECK(std::fabs(sub.theta - exact.theta) < 0.05);

  c.budget = 0;
  CHECK_THROWS_AS(ustat_estimate(data, p, a, c), ValidationError);
}

TEST_CASE("exact cap and warnings")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = cube_data(60, p, { 30, 30 }, 10);
  auto a = fn([](std::span<const double> x) { return x[0]; });
  UStatConfig c;
  c.M = 3;
  c.exact_cap = 1000;
  CHECK_THROWS_WITH_AS(ustat_estimate(data, p, a, c), "exact enumeration exceeds the cap; use SUBSAMPLED with a budget",
                       ValidationError);
  data.complete(0, 0) = 1.5;
  c.M = 0;
  auto r = ustat_estimate(data, p, a, c);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0] == "data lie outside the unit cube");
}
