#include "fusemean/influence.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/parallel.hpp"
#include "fusemean/random.hpp"
#include "fusemean/summation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace fusemean {

namespace {
// Stream id reserved for fold shuffling.
constexpr std::uint64_t kFoldStream = 0x464f4c44;
} // namespace

double
binomial_tail(int M, double eta, int m)
{
  if (!(eta >= 0.0 && eta <= 1.0))
    throw ValidationError("binomial_tail: eta must lie in [0, 1]");
  if (M < 0)
    throw ValidationError("binomial_tail: M must be nonnegative");
  if (m <= 0)
    return 1.0;
  if (m > M)
    return 0.0;
  // Mass terms from the top down, smallest contributions first when eta is
  // moderate; exact enough for the M used here.
  double total = 0.0;
  for (int k = M; k >= m; --k) {
    double log_choose = std::lgamma(M + 1.0) - std::lgamma(k + 1.0) - std::lgamma(M - k + 1.0);
    double pk;
    if (eta == 0.0)
      pk = k == 0 ? 1.0 : 0.0;
    else if (eta == 1.0)
      pk = k == M ? 1.0 : 0.0;
    else
      pk = std::exp(log_choose + k * std::log(eta) + (M - k) * std::log1p(-eta));
    total += pk;
  }
  return std::min(1.0, total);
}

BinomialWeights
BinomialWeights::make(int M, double eta)
{
  BinomialWeights w;
  w.M = M;
  w.eta = eta;
  w.table.resize(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m)
    w.table[static_cast<std::size_t>(m)] = binomial_tail(M, eta, m);
  return w;
}

double
BinomialWeights::operator()(int m) const
{
  if (m <= 0)
    return 1.0;
  if (m > M)
    return 0.0;
  return table[static_cast<std::size_t>(m)];
}

std::uint64_t
chain_count(std::size_t k, int m)
{
  if (m <= 0)
    return 1;
  std::uint64_t count = k;
  for (int j = 1; j < m; ++j)
    count *= (k - 1);
  return count;
}

FoldPlan
make_fold_plan(std::size_t n, int M, std::uint64_t seed)
{
  if (M < 0)
    throw ValidationError("M must be nonnegative");
  if (n < 2 || n < 2 * static_cast<std::size_t>(M))
    throw ValidationError("insufficient data for M folds");
  FoldPlan plan;
  plan.n = n;
  plan.M = M;
  plan.seed = seed;
  CounterRng rng(seed, kFoldStream);
  auto order = shuffled_indices(n, rng);
  std::size_t first = (n + 1) / 2;
  plan.halves[0].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first));
  plan.halves[1].assign(order.begin() + static_cast<std::ptrdiff_t>(first), order.end());
  for (int l = 0; l < 2; ++l) {
    const auto& half = plan.halves[static_cast<std::size_t>(l)];
    auto& pieces = plan.pieces[static_cast<std::size_t>(l)];
    if (M == 0)
      continue;
    std::size_t base = half.size() / static_cast<std::size_t>(M);
    std::size_t extra = half.size() % static_cast<std::size_t>(M);
    std::size_t pos = 0;
    for (int m = 0; m < M; ++m) {
      std::size_t len = base + (static_cast<std::size_t>(m) < extra ? 1 : 0);
      pieces.emplace_back(half.begin() + static_cast<std::ptrdiff_t>(pos),
                          half.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------

PieceRegression::PieceRegression(std::shared_ptr<const PieceData> piece,
                                 std::size_t pattern_index,
                                 const Pattern& pattern,
                                 double lambda,
                                 std::shared_ptr<const ShiftSpec> shifts,
                                 double h,
                                 double T,
                                 std::span<const double> g)
  : piece_(std::move(piece))
  , s_(pattern_index)
  , pattern_(pattern)
  , lambda_(lambda)
  , shifts_(std::move(shifts))
  , kernel_{ pattern, h, KernelFamily::UNIFORM_FULL }
  , T_(T)
{
  std::size_t rows = piece_->rows.rows();
  if (g.size() != rows)
    throw ValidationError("piece regression: response count mismatch");
  if (rows == 0)
    throw ValidationError("piece regression: empty piece");
  responses_.resize(rows);
  std::vector<double> weighted(rows);
  const auto& w = piece_->weight[s_];
  for (std::size_t i = 0; i < rows; ++i) {
    responses_[i] = piece_->in_ball[i] ? g[i] : 0.0;
    weighted[i] = w[i] * responses_[i];
  }
  double total = piece_->weight_total[s_];
  if (!(total > 0.0))
    throw NumericalError("piece regression: zero total shift weight");
  correction_ = pairwise_sum(weighted) / total;
}

double
PieceRegression::operator()(std::span<const double> x_s) const
{
  if (sup_norm(x_s) > T_)
    return 0.0;
  double lr = lambda_ * shifts_->evaluate(pattern_, x_s);
  double w = lr / (piece_->r_hat[s_] + lr);
  double nw = nw_regress(kernel_, responses_, piece_->projected[s_], x_s);
  return w * (nw - correction_);
}

void
AlphaHat::add_term(double coefficient, PieceRegression term)
{
  terms_.emplace_back(coefficient, std::move(term));
}

double
AlphaHat::operator()(std::span<const double> x_s) const
{
  if (terms_.empty() || sup_norm(x_s) > T_)
    return 0.0;
  double total = 0.0;
  for (const auto& [c, term] : terms_)
    total += c * term(x_s);
  return total;
}

std::vector<double>
AlphaHat::evaluate_full_rows(const Matrix& rows) const
{
  std::vector<double> out(rows.rows(), 0.0);
  if (terms_.empty())
    return out;
  parallel_for(rows.rows(), [&](std::size_t i) {
    std::vector<double> x_s;
    project(rows.row(i), pattern_, x_s);
    out[i] = (*this)(x_s);
  });
  return out;
}

std::vector<double>
AlphaHat::evaluate_local_rows(const Matrix& rows_s) const
{
  std::vector<double> out(rows_s.rows(), 0.0);
  if (terms_.empty())
    return out;
  parallel_for(rows_s.rows(), [&](std::size_t i) { out[i] = (*this)(rows_s.row(i)); });
  return out;
}

// ---------------------------------------------------------------------------

HalfContext::HalfContext(const FusedDataset& data,
                         const PatternSet& patterns,
                         const ShiftSpec& shifts,
                         const FoldPlan& plan,
                         int half,
                         const EstimatorConfig& config)
  : patterns_(patterns)
  , shifts_(std::make_shared<ShiftSpec>(shifts))
  , h_(config.h)
  , T_(config.T)
{
  if (half != 0 && half != 1)
    throw ValidationError("half must be 0 or 1");
  if (plan.n != data.n())
    throw ValidationError("fold plan does not match the data");
  if (!(config.h > 0.0 && config.h <= 1.0))
    throw ValidationError("bandwidth must lie in (0, 1]");
  if (!(config.T >= 1.0))
    throw ValidationError("truncation radius must be at least 1");
  std::size_t k = patterns.size();
  for (const auto& s : patterns.patterns()) {
    double lam = data.lambda(s);
    if (!(lam > 0.0))
      throw ValidationError("missing block for " + format_pattern(s));
    lambda_.push_back(lam);
  }
  for (const auto& rows : plan.pieces[static_cast<std::size_t>(half)]) {
    if (rows.empty())
      throw ValidationError("empty piece in fold plan");
    auto piece = std::make_shared<PieceData>();
    piece->rows = data.complete.select_rows(rows);
    std::size_t count = piece->rows.rows();
    piece->in_ball.resize(count);
    for (std::size_t i = 0; i < count; ++i)
      piece->in_ball[i] = sup_norm(piece->rows.row(i)) <= T_ ? 1 : 0;
    piece->projected.resize(k);
    piece->r_hat.resize(k);
    piece->weight.resize(k);
    piece->weight_total.resize(k);
    for (std::size_t s = 0; s < k; ++s) {
      const Pattern& pat = patterns[s];
      std::vector<int> cols(pat.begin(), pat.end());
      piece->projected[s] = piece->rows.select_cols(cols);
      std::vector<double> r(count);
      for (std::size_t i = 0; i < count; ++i)
        r[i] = shifts_->evaluate(pat, piece->projected[s].row(i));
      double r_hat = pairwise_mean(r);
      auto& w = piece->weight[s];
      w.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        double lr = lambda_[s] * r[i];
        w[i] = lr / (r_hat + lr);
      }
      piece->r_hat[s] = r_hat;
      piece->weight_total[s] = pairwise_sum(w);
    }
    pieces_.push_back(std::move(piece));
  }
}

PieceRegression
HalfContext::regression(int m, std::size_t s, std::span<const double> g) const
{
  return PieceRegression(pieces_.at(static_cast<std::size_t>(m)), s, patterns_[s], lambda_[s],
                         shifts_, h_, T_, g);
}

namespace {

std::vector<double>
functional_on_rows(const Functional& a, const Matrix& rows)
{
  std::vector<double> out(rows.rows());
  parallel_for(rows.rows(), [&](std::size_t i) { out[i] = a(rows.row(i)); });
  return out;
}

std::vector<double>
regression_on_piece(const PieceRegression& fit, const PieceData& piece, std::size_t s)
{
  std::vector<double> out(piece.rows.rows());
  parallel_for(out.size(), [&](std::size_t i) { out[i] = fit(piece.projected[s].row(i)); });
  return out;
}

void
check_depth(const FoldPlan& plan, int half, const EstimatorConfig& config)
{
  if (config.M < 0)
    throw ValidationError("M must be nonnegative");
  if (static_cast<int>(plan.pieces[static_cast<std::size_t>(half)].size()) < config.M)
    throw ValidationError("fold plan has fewer pieces than M");
  if (!(config.eta > 0.0 && config.eta <= 1.0))
    throw ValidationError("eta must lie in (0, 1]");
}

} // namespace

std::vector<AlphaHat>
assemble_alpha(const FusedDataset& data,
               const PatternSet& patterns,
               const ShiftSpec& shifts,
               const Functional& functional,
               const FoldPlan& plan,
               int half,
               const EstimatorConfig& config)
{
  std::size_t k = patterns.size();
  std::vector<AlphaHat> alpha;
  for (const auto& s : patterns.patterns())
    alpha.emplace_back(s, config.T);
  if (config.M == 0)
    return alpha;
  check_depth(plan, half, config);

  HalfContext ctx(data, patterns, shifts, plan, half, config);
  auto b = BinomialWeights::make(config.M, config.eta);

  auto a_vals = functional_on_rows(functional, ctx.piece(0).rows);
  std::vector<PieceRegression> prev;
  for (std::size_t s = 0; s < k; ++s) {
    prev.push_back(ctx.regression(0, s, a_vals));
    alpha[s].add_term(b(1), prev.back());
  }
  for (int m = 1; m < config.M; ++m) {
    const PieceData& piece = ctx.piece(m);
    std::vector<std::vector<double>> vals(k);
    for (std::size_t s = 0; s < k; ++s)
      vals[s] = regression_on_piece(prev[s], piece, s);
    double coefficient = (m % 2 == 0 ? 1.0 : -1.0) * b(m + 1);
    std::vector<PieceRegression> cur;
    std::vector<double> g(piece.rows.rows());
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t < k; ++t)
          if (t != s)
            total += vals[t][i];
        g[i] = total;
      }
      cur.push_back(ctx.regression(m, s, g));
      alpha[s].add_term(coefficient, cur.back());
    }
    prev = std::move(cur);
  }
  return alpha;
}

ChainEstimate
fit_chain(const FusedDataset& data,
          const PatternSet& patterns,
          const ShiftSpec& shifts,
          const Functional& functional,
          const FoldPlan& plan,
          int half,
          const std::vector<std::size_t>& chain,
          const EstimatorConfig& config)
{
  if (chain.empty())
    throw ValidationError("chain must be nonempty");
  if (static_cast<int>(chain.size()) > config.M)
    throw ValidationError("chain longer than M");
  for (std::size_t j = 0; j < chain.size(); ++j) {
    if (chain[j] >= patterns.size())
      throw ValidationError("chain pattern index out of range");
    if (j > 0 && chain[j] == chain[j - 1])
      throw ValidationError("chain repeats a pattern in consecutive positions");
  }
  check_depth(plan, half, config);
  HalfContext ctx(data, patterns, shifts, plan, half, config);
  auto g = functional_on_rows(functional, ctx.piece(0).rows);
  auto fit = std::make_shared<PieceRegression>(ctx.regression(0, chain[0], g));
  for (std::size_t j = 1; j < chain.size(); ++j) {
    const PieceData& piece = ctx.piece(static_cast<int>(j));
    g = regression_on_piece(*fit, piece, chain[j - 1]);
    fit = std::make_shared<PieceRegression>(ctx.regression(static_cast<int>(j), chain[j], g));
  }
  return { chain, fit };
}

std::vector<AlphaHat>
assemble_alpha_chains(const FusedDataset& data,
                      const PatternSet& patterns,
                      const ShiftSpec& shifts,
                      const Functional& functional,
                      const FoldPlan& plan,
                      int half,
                      const EstimatorConfig& config)
{
  std::size_t k = patterns.size();
  std::vector<AlphaHat> alpha;
  for (const auto& s : patterns.patterns())
    alpha.emplace_back(s, config.T);
  if (config.M == 0)
    return alpha;
  check_depth(plan, half, config);
  // k (k-1)^{M-1} chains per terminal pattern, compared in floating point to
  // avoid overflow.
  double per_terminal = static_cast<double>(k) * std::pow(static_cast<double>(k - 1), config.M - 1);
  if (per_terminal > static_cast<double>(config.max_chains))
    throw ValidationError("chain enumeration exceeds the configured cap");

  HalfContext ctx(data, patterns, shifts, plan, half, config);
  auto b = BinomialWeights::make(config.M, config.eta);
  auto a_vals = functional_on_rows(functional, ctx.piece(0).rows);

  std::function<void(int, const PieceRegression&, std::size_t)> extend =
    [&](int depth, const PieceRegression& fit, std::size_t last) {
      // `fit` is a chain of length depth+1 ending in `last`.
      double coefficient = (depth % 2 == 0 ? 1.0 : -1.0) * b(depth + 1);
      alpha[last].add_term(coefficient, fit);
      if (depth + 1 >= config.M)
        return;
      const PieceData& piece = ctx.piece(depth + 1);
      auto g = regression_on_piece(fit, piece, last);
      for (std::size_t s = 0; s < k; ++s)
        if (s != last)
          extend(depth + 1, ctx.regression(depth + 1, s, g), s);
    };
  for (std::size_t s = 0; s < k; ++s)
    extend(0, ctx.regression(0, s, a_vals), s);
  return alpha;
}

} // namespace fusemean
