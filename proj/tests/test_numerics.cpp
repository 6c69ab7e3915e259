#include "fusemean/matrix.hpp"
#include "fusemean/parallel.hpp"
#include "fusemean/random.hpp"
#include "fusemean/summation.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

using namespace fusemean;

TEST_CASE("pairwise sums match long double accumulation")
{
  CounterRng rng(3, 0);
  for (std::size_t n : { 1u, 2u, 7u, 100u, 4097u }) {
    std::vector<double> v(n);
    long double ref = 0;
    for (auto& x : v) {
      x = rng.normal() * 1e3;
      ref += x;
    }
    CHECK(pairwise_sum(v) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
    CHECK(pairwise_mean(v) == doctest::Approx(static_cast<double>(ref / n)).epsilon(1e-12));
  }
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK_THROWS_AS(pairwise_mean(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("matrix row access and selection")
{
  Matrix m{ { 1, 2, 3 }, { 4, 5, 6 } };
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  std::vector<std::size_t> rows{ 1, 0 };
  Matrix r = m.select_rows(rows);
  CHECK(r(0, 0) == 4);
  std::vector<int> cols{ 2, 0 };
  Matrix c = m.select_cols(cols);
  CHECK(c(1, 0) == 6);
  CHECK(c(1, 1) == 4);
  std::vector<double> extra{ 7, 8, 9 };
  m.append_row(extra);
  CHECK(m.rows() == 3);
  std::vector<double> bad{ 1 };
  CHECK_THROWS(m.append_row(bad));
  std::vector<double> x{ -3, 2 };
  CHECK(sup_norm(x) == 3);
}

TEST_CASE("parallel_for visits every index once and rethrows")
{
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
  bool once = true;
  for (auto& h : hits)
    once = once && h.load() == 1;
  CHECK(once);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 5)
                      throw std::runtime_error("boom");
                  }, 3),
                  std::runtime_error);
  std::atomic<int> inner{ 0 };
  parallel_for(4, [&](std::size_t) { parallel_for(5, [&](std::size_t) { inner++; }); }, 2);
  CHECK(inner.load() == 20);
}
