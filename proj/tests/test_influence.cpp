#include "fusemean/errors.hpp"
#include "fusemean/influence.hpp"
#include "fusemean/random.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace fusemean;

namespace {

FusedDataset
uniform_data(std::size_t n, const PatternSet& p, std::vector<std::size_t> sizes, std::uint64_t seed, double scale = 1.0)
{
  CounterRng rng(seed, 0);
  int d = p.dimension();
  FusedDataset data;
  data.complete = Matrix(n, static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      data.complete(i, static_cast<std::size_t>(j)) = scale * (2.0 * rng.uniform() - 1.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    Matrix block(sizes[k], p[k].size());
    for (std::size_t i = 0; i < sizes[k]; ++i)
      for (std::size_t j = 0; j < p[k].size(); ++j)
        block(i, j) = scale * (2.0 * rng.uniform() - 1.0);
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

//! Independent single-step fit: shift weight times (NW of in-ball responses
//! minus their shift-weighted mean), zero outside the ball.
struct NaiveStep
{
  Matrix rows; //!< full rows of the piece
  std::vector<double> resp;
  Pattern pattern;
  double lambda, h, T;
  const ShiftSpec* shifts;

  double r_hat() const
  {
    double s = 0;
    std::vector<double> x;
    for (std::size_t i = 0; i < rows.rows(); ++i)
      s += shifts->evaluate_full(pattern, rows.row(i));
    return s / static_cast<double>(rows.rows());
  }

  double operator()(const std::vector<double>& x_s) const
  {
    double sup = 0;
    for (double v : x_s)
      sup = std::max(sup, std::fabs(v));
    if (sup > T)
      return 0.0;
    double rh = r_hat();
    auto w_of = [&](double r) { return lambda * r / (rh + lambda * r); };
    double num = 0, den = 0, cnum = 0, cden = 0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      auto row = rows.row(i);
      double rs = 0;
      for (double v : row)
        rs = std::max(rs, std::fabs(v));
      double y = rs <= T ? resp[i] : 0.0;
      bool near = true;
      for (std::size_t j = 0; j < pattern.size(); ++j)
        near = near && std::fabs(row[static_cast<std::size_t>(pattern[j])] - x_s[j]) <= h;
      if (near) {
        num += y;
        den += 1;
      }
      double w = w_of(shifts->evaluate_full(pattern, row));
      cnum += w * y;
      cden += w;
    }
    double nw = den > 0 ? num / den : 0.0;
    return w_of(shifts->evaluate(pattern, x_s)) * (nw - cnum / cden);
  }
};

std::vector<double>
local(std::span<const double> row, const Pattern& s)
{
  std::vector<double> out;
  project(row, s, out);
  return out;
}

} // namespace

TEST_CASE("binomial tail examples")
{
  CHECK(binomial_tail(5, 0.3, 0) == 1.0);
  CHECK(binomial_tail(1, 1.0, 1) == 1.0);
  CHECK(binomial_tail(3, 1.0 / 3.0, 1) == doctest::Approx(19.0 / 27.0).epsilon(1e-14));
  CHECK(binomial_tail(3, 0.5, 4) == 0.0);
  CHECK(binomial_tail(0, 0.5, 0) == 1.0);
  CHECK(binomial_tail(0, 0.5, 1) == 0.0);
  CHECK(binomial_tail(1, 0.5, 1) == 0.5);
  CHECK_THROWS_AS(binomial_tail(3, 1.5, 1), ValidationError);
}

TEST_CASE("binomial tail recurrence and monotonicity")
{
  CounterRng rng(17, 0);
  for (int t = 0; t < 200; ++t) {
    int M = static_cast<int>(rng.bounded(40));
    double eta = rng.uniform();
    auto b = BinomialWeights::make(M, eta);
    auto b1 = BinomialWeights::make(M + 1, eta);
    CHECK(b(0) == 1.0);
    for (int m = 0; m <= M + 1; ++m) {
      CHECK(std::fabs((1 - eta) * b(m) + eta * b(m - 1) - b1(m)) < 1e-12);
      if (m >= 1)
        CHECK(b(m) <= b(m - 1) + 1e-15);
    }
    CHECK(b(M + 1) == 0.0);
  }
}

TEST_CASE("fold plan examples")
{
  auto p = make_fold_plan(10, 2, 1);
  CHECK(p.halves[0].size() == 5);
  CHECK(p.halves[1].size() == 5);
  CHECK(p.pieces[0][0].size() == 3);
  CHECK(p.pieces[0][1].size() == 2);
  CHECK(p.pieces[1][0].size() == 3);
  CHECK(p.pieces[1][1].size() == 2);
  auto q = make_fold_plan(4, 1, 0);
  CHECK(q.halves[0].size() == 2);
  CHECK(q.pieces[1].size() == 1);
  CHECK_THROWS_WITH_AS(make_fold_plan(3, 2, 0), "insufficient data for M folds", ValidationError);

  auto r = make_fold_plan(11, 3, 9);
  CHECK(r.halves[0].size() == 6);
  CHECK(r.halves[1].size() == 5);
  std::set<std::size_t> all;
  for (int l = 0; l < 2; ++l) {
    std::size_t lo = 99, hi = 0, total = 0;
    for (const auto& piece : r.pieces[static_cast<std::size_t>(l)]) {
      lo = std::min(lo, piece.size());
      hi = std::max(hi, piece.size());
      total += piece.size();
      all.insert(piece.begin(), piece.end());
    }
    CHECK(hi - lo <= 1);
    CHECK(total == r.halves[static_cast<std::size_t>(l)].size());
  }
  CHECK(all.size() == 11);
  auto again = make_fold_plan(11, 3, 9);
  CHECK(again.halves == r.halves);
  CHECK(make_fold_plan(11, 3, 10).halves != r.halves);
}

TEST_CASE("chain counts")
{
  CHECK(chain_count(2, 1) == 2);
  CHECK(chain_count(3, 3) == 12);
  CHECK(chain_count(1, 2) == 0);
}

TEST_CASE("fit_chain examples")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = uniform_data(40, p, { 40, 40 }, 3);
  auto plan = make_fold_plan(40, 1, 0);
  EstimatorConfig c;
  c.M = 1;
  c.h = 0.5;
  c.T = 1.0;
  auto constant = fn([](std::span<const double>) { return 2.5; });
  auto chain = fit_chain(data, p, ShiftSpec::mcar(), constant, plan, 0, { 0 }, c);
  for (double x : { -0.9, -0.3, 0.0, 0.4, 0.95 })
    CHECK(std::fabs(chain(std::vector<double>{ x })) < 1e-14);
  CHECK(chain(std::vector<double>{ c.T + 0.1 }) == 0.0);

  // One training point inside the ball, lambda = 1: (1/2)(a(x) - a(x)) = 0.
  FusedDataset one;
  one.complete = Matrix{ { 0.2, 0.3 }, { 0.5, -0.5 } };
  one.incomplete[{ 0 }] = Matrix{ { 0.1 }, { 0.2 } };
  one.incomplete[{ 1 }] = Matrix{ { 0.1 }, { 0.2 } };
  auto plan1 = make_fold_plan(2, 1, 0);
  auto prod = fn([](std::span<const double> x) { return x[0] * x[1]; });
  auto single = fit_chain(one, p, ShiftSpec::mcar(), prod, plan1, 0, { 0 }, c);
  auto row = one.complete.row(plan1.pieces[0][0][0]);
  CHECK(std::fabs(single(std::vector<double>{ row[0] })) < 1e-15);

  CHECK_THROWS_AS(fit_chain(data, p, ShiftSpec::mcar(), prod, plan, 0, { 0, 0 }, c), ValidationError);
  CHECK_THROWS_AS(fit_chain(data, p, ShiftSpec::mcar(), prod, plan, 0, { 0, 1 }, c), ValidationError);
}

TEST_CASE("fit_chain matches an independent two-step computation")
{
  PatternSet p(3, { { 0, 1 }, { 2 }, { 1 } });
  auto data = uniform_data(90, p, { 50, 70, 30 }, 8, 1.3);
  auto plan = make_fold_plan(90, 2, 4);
  EstimatorConfig c;
  c.M = 2;
  c.h = 0.6;
  c.T = 1.0;
  auto shifts = ShiftSpec::shifted({ { { 0, 1 }, [](std::span<const double> x) { return 1.0 + 0.5 * x[0] * x[0]; } },
                                     { { 2 }, [](std::span<const double> x) { return std::exp(0.3 * x[0]); } } });
  auto a = fn([](std::span<const double> x) { return x[0] * x[1] + std::sin(x[2]); });

  for (int half : { 0, 1 }) {
    std::vector<std::size_t> chain{ 0, 1 };
    auto fit = fit_chain(data, p, shifts, a, plan, half, chain, c);
    Matrix piece1 = data.complete.select_rows(plan.pieces[static_cast<std::size_t>(half)][0]);
    Matrix piece2 = data.complete.select_rows(plan.pieces[static_cast<std::size_t>(half)][1]);
    std::vector<double> a1(piece1.rows());
    for (std::size_t i = 0; i < a1.size(); ++i)
      a1[i] = a(piece1.row(i));
    NaiveStep first{ piece1, a1, p[0], data.lambda(p[0]), c.h, c.T, &shifts };
    std::vector<double> g(piece2.rows());
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = first(local(piece2.row(i), p[0]));
    NaiveStep second{ piece2, g, p[1], data.lambda(p[1]), c.h, c.T, &shifts };
    for (double x : { -1.2, -0.7, -0.1, 0.0, 0.33, 0.8, 0.99 }) {
      std::vector<double> q{ x };
      CHECK(fit(q) == doctest::Approx(second(q)).epsilon(1e-12));
    }
  }
}

TEST_CASE("assemble_alpha basics")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = uniform_data(60, p, { 30, 60 }, 5);
  auto prod = fn([](std::span<const double> x) { return x[0] * x[1] + x[0]; });
  EstimatorConfig c;
  c.h = 0.5;
  c.T = 1.0;
  c.eta = 0.5;

  c.M = 0;
  auto plan0 = make_fold_plan(60, 0, 1);
  for (const auto& alpha : assemble_alpha(data, p, ShiftSpec::mcar(), prod, plan0, 0, c))
    CHECK(alpha(std::vector<double>{ 0.3 }) == 0.0);

  // M = 1 with two patterns: one chain per pattern with weight b(1) = 1/2.
  c.M = 1;
  auto plan = make_fold_plan(60, 1, 1);
  auto alpha = assemble_alpha(data, p, ShiftSpec::mcar(), prod, plan, 0, c);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(alpha[s].terms() == 1);
    auto chain = fit_chain(data, p, ShiftSpec::mcar(), prod, plan, 0, { s }, c);
    for (double x : { -0.5, 0.1, 0.7 }) {
      std::vector<double> q{ x };
      CHECK(alpha[s](q) == doctest::Approx(0.5 * chain(q)).epsilon(1e-14));
    }
    CHECK(alpha[s](std::vector<double>{ 1.5 }) == 0.0);
  }

  auto constant = fn([](std::span<const double>) { return -4.0; });
  c.M = 3;
  auto plan3 = make_fold_plan(60, 3, 1);
  for (const auto& al : assemble_alpha(data, p, ShiftSpec::mcar(), constant, plan3, 1, c))
    for (double x : { -0.5, 0.1, 0.7 })
      CHECK(std::fabs(al(std::vector<double>{ x })) < 1e-13);
}

TEST_CASE("aggregated recursion equals explicit chain enumeration")
{
  PatternSet p(3, { { 0 }, { 1, 2 }, { 0, 2 } });
  auto data = uniform_data(120, p, { 60, 80, 100 }, 12, 1.2);
  auto shifts = ShiftSpec::shifted({ { { 0 }, [](std::span<const double> x) { return 1.5 + x[0]; } } });
  auto a = fn([](std::span<const double> x) { return x[0] * x[1] - x[2] * x[2]; });
  EstimatorConfig c;
  c.M = 4;
  c.eta = 1.0 / 3.0;
  c.h = 0.7;
  c.T = 1.0;
  auto plan = make_fold_plan(120, 4, 2);
  CounterRng rng(4, 4);
  for (int half : { 0, 1 }) {
    auto fast = assemble_alpha(data, p, shifts, a, plan, half, c);
    auto slow = assemble_alpha_chains(data, p, shifts, a, plan, half, c);
    CHECK(slow[0].terms() == 1 + 2 + 4 + 8);
    for (std::size_t s = 0; s < 3; ++s)
      for (int t = 0; t < 40; ++t) {
        std::vector<double> q(p[s].size());
        for (auto& v : q)
          v = 2.4 * rng.uniform() - 1.2;
        double x = fast[s](q), y = slow[s](q);
        CHECK(std::fabs(x - y) <= 1e-12 * std::max(1.0, std::fabs(y)));
      }
  }
  c.max_chains = 10;
  CHECK_THROWS_WITH_AS(assemble_alpha_chains(data, p, shifts, a, plan, 0, c),
                       "chain enumeration exceeds the configured cap", ValidationError);
}

TEST_CASE("first-step fits ignore a constant shift of a inside the ball")
{
  PatternSet p(2, { { 0 }, { 1 } });
  auto data = uniform_data(50, p, { 40, 40 }, 21, 0.9);
  auto plan = make_fold_plan(50, 1, 3);
  EstimatorConfig c;
  c.M = 1;
  c.h = 0.4;
  c.T = 1.0;
  auto a = fn([](std::span<const double> x) { return x[0] - 2 * x[1] * x[1]; });
  auto b = fn([](std::span<const double> x) { return x[0] - 2 * x[1] * x[1] + 7.25; });
  Matrix piece = data.complete.select_rows(plan.pieces[0][0]);
  for (std::size_t s = 0; s < 2; ++s) {
    auto fa = fit_chain(data, p, ShiftSpec::mcar(), a, plan, 0, { s }, c);
    auto fb = fit_chain(data, p, ShiftSpec::mcar(), b, plan, 0, { s }, c);
    for (std::size_t i = 0; i < piece.rows(); ++i) {
      auto q = local(piece.row(i), p[s]);
      CHECK(fa(q) == doctest::Approx(fb(q)).epsilon(1e-12).scale(1.0));
    }
  }
}
