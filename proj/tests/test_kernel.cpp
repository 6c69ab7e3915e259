#include "fusemean/errors.hpp"
#include "fusemean/kernel.hpp"
#include "fusemean/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace fusemean;

TEST_CASE("kernel weight examples")
{
  MarginalKernel full{ { 0 }, 0.5, KernelFamily::UNIFORM_FULL };
  CHECK(kernel_weight(full, std::vector<double>{ 0.2 }, std::vector<double>{ 0.1 }) == doctest::Approx(1.0));
  CHECK(kernel_weight(full, std::vector<double>{ 0.7 }, std::vector<double>{ 0.1 }) == 0.0);
  MarginalKernel half{ { 0, 1 }, 1.0, KernelFamily::UNIFORM_HALF };
  std::vector<double> x{ 0.3, 0.4 };
  CHECK(kernel_weight(half, x, x) == 1.0);
  CHECK_THROWS(kernel_weight(half, x, std::vector<double>{ 0.3 }));
  CHECK_THROWS_AS(check_kernel(MarginalKernel{ { 0 }, 0.0, KernelFamily::UNIFORM_FULL }), ValidationError);
  CHECK_THROWS_AS(check_kernel(MarginalKernel{ { 0 }, 1.5, KernelFamily::UNIFORM_FULL }), ValidationError);
}

TEST_CASE("kernel integrates to one")
{
  // Riemann sum of the marginal kernel over a grid around the origin.
  for (auto family : { KernelFamily::UNIFORM_FULL, KernelFamily::UNIFORM_HALF })
    for (double h : { 0.25, 0.6, 1.0 }) {
      MarginalKernel k{ { 0, 1 }, h, family };
      const int N = 800;
      double step = 3.0 / N, total = 0;
      std::vector<double> origin{ 0, 0 };
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          std::vector<double> y{ -1.5 + (i + 0.5) * step, -1.5 + (j + 0.5) * step };
          total += kernel_weight(k, origin, y) * step * step;
        }
      CHECK(total == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("kernel symmetry")
{
  CounterRng rng(5, 0);
  MarginalKernel k{ { 0, 2 }, 0.4, KernelFamily::UNIFORM_FULL };
  for (int t = 0; t < 500; ++t) {
    std::vector<double> x{ rng.uniform(), rng.uniform() };
    std::vector<double> y{ rng.uniform(), rng.uniform() };
    CHECK(kernel_weight(k, x, y) == kernel_weight(k, y, x));
    std::vector<double> fx{ -x[0], x[1] }, fy{ -y[0], y[1] };
    CHECK(kernel_weight(k, x, y) == kernel_weight(k, fx, fy));
  }
}

TEST_CASE("density estimate examples")
{
  MarginalKernel k{ { 0 }, 1.0, KernelFamily::UNIFORM_FULL };
  std::vector<double> x{ 0.3 };
  CHECK(density_estimate(k, Matrix{ { 0.3 } }, x) == 0.5);
  CHECK(density_estimate(k, Matrix{ { 5.0 }, { -5.0 } }, x) == 0.0);
  CHECK(density_estimate(k, Matrix{ { 0.3 }, { 5.0 } }, x) == 0.25);
  CHECK_THROWS(density_estimate(k, Matrix(0, 1), x));
  // Scaling h^{-|S|} when all sample points sit at x.
  MarginalKernel k2{ { 0, 1 }, 0.25, KernelFamily::UNIFORM_FULL };
  std::vector<double> p{ 0.1, 0.2 };
  CHECK(density_estimate(k2, Matrix{ { 0.1, 0.2 }, { 0.1, 0.2 } }, p) == doctest::Approx(0.25 * 16.0));
}

TEST_CASE("pooled density examples")
{
  MarginalKernel k{ { 0 }, 1.0, KernelFamily::UNIFORM_HALF };
  std::vector<double> x{ 0.5 };
  CHECK(pooled_density(k, Matrix{ { 0.5 } }, Matrix{ { 0.5 } }, x) == 1.0);
  CHECK(pooled_density(k, Matrix{ { 3.0 } }, Matrix{ { -3.0 } }, x) == 0.0);
  Matrix c{ { 0.4 }, { 0.9 }, { 2.0 } };
  CHECK(pooled_density(k, c, Matrix(0, 1), x) == density_estimate(k, c, x));
  CHECK_THROWS(pooled_density(k, Matrix(0, 1), Matrix(0, 1), x));
}

TEST_CASE("Nadaraya-Watson examples and bounds")
{
  MarginalKernel k{ { 0 }, 0.5, KernelFamily::UNIFORM_FULL };
  std::vector<double> x{ 0.0 };
  Matrix cov{ { 0.1 }, { -0.2 }, { 3.0 } };
  CHECK(nw_regress(k, std::vector<double>{ 4, 4, 4 }, cov, x) == 4.0);
  CHECK(nw_regress(k, std::vector<double>{ 1, 3, 100 }, cov, x) == 2.0);
  CHECK(nw_regress(k, std::vector<double>{ 1, 3, 100 }, cov, std::vector<double>{ 10.0 }) == 0.0);
  CHECK_THROWS(nw_regress(k, std::vector<double>{ 1, 3 }, cov, x));

  CounterRng rng(8, 1);
  for (int t = 0; t < 200; ++t) {
    Matrix c(20, 1);
    std::vector<double> y(20);
    for (std::size_t i = 0; i < 20; ++i) {
      c(i, 0) = rng.uniform();
      y[i] = rng.normal();
    }
    std::vector<double> q{ rng.uniform() };
    if (support_count(k, c, q) == 0)
      continue;
    double v = nw_regress(k, y, c, q);
    CHECK(v >= *std::min_element(y.begin(), y.end()));
    CHECK(v <= *std::max_element(y.begin(), y.end()));
  }
}

TEST_CASE("NW matches exact conditional means on a finite grid")
{
  // Atoms 0, 0.25, 0.5, 0.75 with bandwidth below the gap: the regression at
  // an atom averages the responses of rows sharing that atom.
  CounterRng rng(31, 0);
  MarginalKernel k{ { 0 }, 0.1, KernelFamily::UNIFORM_FULL };
  Matrix cov(400, 1);
  std::vector<double> y(400);
  std::map<double, std::pair<double, int>> groups;
  for (std::size_t i = 0; i < 400; ++i) {
    double atom = 0.25 * static_cast<double>(rng.bounded(4));
    cov(i, 0) = atom;
    y[i] = rng.normal() + atom;
    groups[atom].first += y[i];
    groups[atom].second += 1;
  }
  for (const auto& [atom, acc] : groups)
    CHECK(nw_regress(k, y, cov, std::vector<double>{ atom }) ==
          doctest::Approx(acc.first / acc.second).epsilon(1e-12));
}
