#include "fusemean/ustat.hpp"

#include "fusemean/crossfit.hpp"
#include "fusemean/errors.hpp"
#include "fusemean/influence.hpp"
#include "fusemean/kernel.hpp"
#include "fusemean/parallel.hpp"
#include "fusemean/random.hpp"
#include "fusemean/summation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace fusemean {

std::uint64_t
falling_factorial(std::uint64_t n, std::uint64_t m)
{
  if (m > n)
    throw ValidationError("falling factorial needs m <= n");
  std::uint64_t out = 1;
  for (std::uint64_t j = 0; j < m; ++j) {
    std::uint64_t f = n - j;
    if (out > std::numeric_limits<std::uint64_t>::max() / f)
      throw NumericalError("falling factorial overflows 64 bits");
    out *= f;
  }
  return out;
}

double
chain_weight(const FusedDataset& data,
             const PatternSet& patterns,
             const std::vector<std::size_t>& chain)
{
  double n = static_cast<double>(data.n());
  double v = 1.0;
  for (std::size_t s : chain)
    v /= 1.0 + n / static_cast<double>(data.n_pattern(patterns[s]));
  return v;
}

namespace {

//! Everything a tuple evaluation needs, computed once from the data.
struct TupleKernel
{
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<double> a;                 //!< a(X_i)
  std::vector<Matrix> projected;         //!< complete rows on S
  std::vector<std::vector<double>> fhat; //!< pooled density at X_i, per S
  std::vector<double> c;                 //!< (1 + n/n_S)^{-1}
  std::vector<MarginalKernel> kernels;

  double g(std::size_t s, std::size_t from, std::size_t to) const
  {
    const MarginalKernel& ker = kernels[s];
    auto x = projected[s].row(from);
    auto y = projected[s].row(to);
    double radius = ker.radius();
    bool inside = true;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (!(std::fabs(y[j] - x[j]) <= radius)) {
        inside = false;
        break;
      }
    double kval = inside ? ker.height() : 0.0;
    return kval / fhat[s][from] - 1.0;
  }

  //! a(x_1) times the chain-weighted sum over all chains of length
  //! |idx|-1 of the product of g factors.
  double evaluate(const std::size_t* idx, int m, std::vector<double>& cur, std::vector<double>& next) const
  {
    cur.assign(k, 0.0);
    next.assign(k, 0.0);
    for (std::size_t s = 0; s < k; ++s)
      cur[s] = g(s, idx[0], idx[1]);
    for (int j = 1; j < m; ++j) {
      double pooled = 0.0;
      for (std::size_t s = 0; s < k; ++s)
        pooled += c[s] * cur[s];
      for (std::size_t s = 0; s < k; ++s)
        next[s] = g(s, idx[j], idx[j + 1]) * (pooled - c[s] * cur[s]);
      std::swap(cur, next);
    }
    double total = 0.0;
    for (std::size_t s = 0; s < k; ++s)
      total += cur[s];
    return a[idx[0]] * total;
  }
};

//! Lexicographic unranking of injective tuples of length len from [0, n).
void
unrank(std::uint64_t rank, std::size_t n, std::size_t len, std::size_t* out)
{
  std::vector<std::size_t> taken; // sorted
  for (std::size_t p = 0; p < len; ++p) {
    std::uint64_t block = falling_factorial(n - p - 1, len - p - 1);
    auto idx = static_cast<std::size_t>(rank / block);
    rank %= block;
    // digit-th smallest index not yet taken
    for (std::size_t t : taken)
      if (t <= idx)
        ++idx;
    taken.insert(std::upper_bound(taken.begin(), taken.end(), idx), idx);
    out[p] = idx;
  }
}

//! Sum of the tuple kernel over every injective tuple with first index i,
//! visited lexicographically.
double
first_index_block(const TupleKernel& tk, int m, std::size_t i)
{
  std::size_t len = static_cast<std::size_t>(m) + 1;
  std::vector<std::size_t> idx(len);
  std::vector<char> used(tk.n, 0);
  std::vector<double> values;
  std::vector<double> cur, next;
  idx[0] = i;
  used[i] = 1;
  // Iterative odometer over positions 1..len-1.
  std::vector<std::size_t> pos(len, 0);
  std::size_t p = 1;
  pos[1] = 0;
  while (p >= 1) {
    if (pos[p] >= tk.n) {
      pos[p] = 0;
      --p;
      if (p == 0)
        break;
      used[idx[p]] = 0;
      ++pos[p];
      continue;
    }
    if (used[pos[p]]) {
      ++pos[p];
      continue;
    }
    idx[p] = pos[p];
    if (p + 1 == len) {
      values.push_back(tk.evaluate(idx.data(), m, cur, next));
      ++pos[p];
      continue;
    }
    used[idx[p]] = 1;
    ++p;
    pos[p] = 0;
  }
  return pairwise_sum(values);
}

double
exact_average(const TupleKernel& tk, int m)
{
  std::vector<double> blocks(tk.n);
  parallel_for(tk.n, [&](std::size_t i) { blocks[i] = first_index_block(tk, m, i); });
  auto total = falling_factorial(tk.n, static_cast<std::uint64_t>(m) + 1);
  return pairwise_sum(blocks) / static_cast<double>(total);
}

double
subsampled_average(const TupleKernel& tk, int m, std::uint64_t budget, std::uint64_t seed)
{
  std::size_t len = static_cast<std::size_t>(m) + 1;
  std::uint64_t total = falling_factorial(tk.n, len);
  // Floyd's algorithm: `budget` distinct ranks, uniform over subsets.
  CounterRng rng(seed, 0x55530000ULL + static_cast<std::uint64_t>(m));
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(budget * 2);
  for (std::uint64_t j = total - budget; j < total; ++j) {
    std::uint64_t t = rng.bounded(j + 1);
    if (!chosen.insert(t).second)
      chosen.insert(j);
  }
  std::vector<std::uint64_t> ranks(chosen.begin(), chosen.end());
  std::sort(ranks.begin(), ranks.end());
  std::vector<double> values(ranks.size());
  parallel_for(ranks.size(), [&](std::size_t r) {
    std::vector<std::size_t> idx(len);
    std::vector<double> cur, next;
    unrank(ranks[r], tk.n, len, idx.data());
    values[r] = tk.evaluate(idx.data(), m, cur, next);
  });
  return pairwise_mean(values);
}

bool
outside_unit_cube(const Matrix& m)
{
  return std::any_of(m.data().begin(), m.data().end(),
                     [](double v) { return v < 0.0 || v > 1.0; });
}

} // namespace

UStatResult
ustat_estimate(const FusedDataset& data,
               const PatternSet& patterns,
               const Functional& functional,
               const UStatConfig& config)
{
  require_valid(data, patterns, ShiftSpec::mcar());
  if (config.M < 0)
    throw ValidationError("M must be nonnegative");
  if (!(config.h > 0.0 && config.h <= 1.0))
    throw ValidationError("bandwidth must lie in (0, 1]");
  std::size_t n = data.n();
  std::size_t k = patterns.size();
  double eta = config.eta.value_or(1.0 / static_cast<double>(k));
  if (!(eta > 0.0 && eta <= 1.0))
    throw ValidationError("eta must lie in (0, 1]");

  UStatResult result;
  bool outside = outside_unit_cube(data.complete);
  for (const auto& [s, block] : data.incomplete)
    outside = outside || outside_unit_cube(block);
  if (outside)
    result.warnings.emplace_back("data lie outside the unit cube");

  double cc = complete_case_mean(data, functional);
  result.term_averages.push_back(cc);
  result.tuples_per_term.push_back(n);
  if (config.M == 0) {
    result.theta = cc;
    return result;
  }
  if (n < static_cast<std::size_t>(config.M) + 1)
    throw ValidationError("need more complete rows than M");

  std::vector<std::uint64_t> totals;
  double exact_cost = 0.0;
  for (int m = 1; m <= config.M; ++m) {
    std::uint64_t t;
    try {
      t = falling_factorial(n, static_cast<std::uint64_t>(m) + 1);
    } catch (const NumericalError&) {
      t = std::numeric_limits<std::uint64_t>::max();
    }
    totals.push_back(t);
    exact_cost += static_cast<double>(t) * static_cast<double>(chain_count(k, m));
  }
  if (config.enumeration == Enumeration::EXACT && exact_cost > static_cast<double>(config.exact_cap))
    throw ValidationError("exact enumeration exceeds the cap; use SUBSAMPLED with a budget");
  if (config.enumeration == Enumeration::SUBSAMPLED && config.budget == 0)
    throw ValidationError("subsampling budget must be positive");

  TupleKernel tk;
  tk.n = n;
  tk.k = k;
  tk.a.resize(n);
  parallel_for(n, [&](std::size_t i) { tk.a[i] = functional(data.complete.row(i)); });
  for (std::size_t s = 0; s < k; ++s) {
    const Pattern& pat = patterns[s];
    MarginalKernel ker{ pat, config.h, KernelFamily::UNIFORM_HALF };
    std::vector<int> cols(pat.begin(), pat.end());
    Matrix proj = data.complete.select_cols(cols);
    const Matrix& block = data.incomplete.at(pat);
    std::vector<double> f(n);
    parallel_for(n, [&](std::size_t i) { f[i] = pooled_density(ker, proj, block, proj.row(i)); });
    if (std::any_of(f.begin(), f.end(), [](double v) { return !(v > 0.0); }))
      throw NumericalError("degenerate density estimate");
    tk.kernels.push_back(ker);
    tk.projected.push_back(std::move(proj));
    tk.fhat.push_back(std::move(f));
    tk.c.push_back(1.0 / (1.0 + static_cast<double>(n) / static_cast<double>(block.rows())));
  }

  auto b = BinomialWeights::make(config.M, eta);
  double theta = cc;
  for (int m = 1; m <= config.M; ++m) {
    std::uint64_t total = totals[static_cast<std::size_t>(m - 1)];
    double avg;
    std::uint64_t used;
    if (config.enumeration == Enumeration::EXACT || config.budget >= total) {
      avg = exact_average(tk, m);
      used = total;
    } else {
      avg = subsampled_average(tk, m, config.budget, config.seed);
      used = config.budget;
    }
    result.term_averages.push_back(avg);
    result.tuples_per_term.push_back(used);
    theta += (m % 2 == 0 ? 1.0 : -1.0) * b(m) * avg;
  }
  result.theta = theta;
  return result;
}

} // namespace fusemean
