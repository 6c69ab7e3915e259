#include "fusemean/oracles.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/influence.hpp"
#include "fusemean/summation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace fusemean {

namespace {

//! Per-problem tables shared by the oracle routines.
struct Problem
{
  const FiniteSupportDistribution* dist;
  std::vector<MarginalIndex> index;
  std::vector<std::vector<double>> rbar; //!< per pattern, per atom
  std::vector<double> lambda;
  std::vector<double> a;                 //!< on support
  double theta = 0.0;

  Problem(const FiniteSupportDistribution& d,
          const PatternSet& patterns,
          const ShiftSpec& shifts,
          const std::vector<double>& lam,
          const Functional& functional)
    : dist(&d)
    , lambda(lam)
  {
    if (patterns.dimension() != d.dimension())
      throw ValidationError("pattern set and distribution differ in dimension");
    if (lam.size() != patterns.size())
      throw ValidationError("one lambda per pattern is required");
    for (double l : lam)
      if (!(l > 0.0) || !std::isfinite(l))
        throw ValidationError("lambda must be positive and finite");
    for (const auto& s : patterns.patterns()) {
      index.emplace_back(d, s);
      rbar.push_back(normalized_shift(index.back(), shifts));
    }
    a.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      a[i] = functional(d.point(i));
    theta = d.expectation(a);
  }

  std::size_t k() const { return index.size(); }

  //! Table values spread over the support.
  std::vector<double> on_support(std::size_t s, const MarginalTable& t) const
  {
    std::vector<double> out(dist->size());
    std::vector<double> x_s;
    for (std::size_t i = 0; i < out.size(); ++i) {
      project(dist->point(i), index[s].pattern(), x_s);
      out[i] = t.lookup(x_s);
    }
    return out;
  }

  //! P_S(g) per atom.
  std::vector<double> project_step(std::size_t s, std::span<const double> g) const
  {
    const MarginalIndex& idx = index[s];
    auto cond = idx.conditional_mean(g);
    std::vector<double> w(idx.atoms());
    std::vector<double> num(idx.atoms()), den(idx.atoms());
    for (std::size_t u = 0; u < idx.atoms(); ++u) {
      double lr = lambda[s] * rbar[s][u];
      w[u] = lr / (1.0 + lr);
      num[u] = idx.mass(u) * w[u] * cond[u];
      den[u] = idx.mass(u) * w[u];
    }
    double centre = pairwise_sum(num) / pairwise_sum(den);
    std::vector<double> out(idx.atoms());
    for (std::size_t u = 0; u < idx.atoms(); ++u)
      out[u] = w[u] * (cond[u] - centre);
    return out;
  }

  std::vector<double> spread(std::size_t s, const std::vector<double>& per_atom) const
  {
    std::vector<double> out(dist->size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = per_atom[index[s].atom_of(i)];
    return out;
  }
};

double
variance_on_support(const FiniteSupportDistribution& dist, const std::vector<double>& values)
{
  double mean = dist.expectation(values);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    sq[i] = (values[i] - mean) * (values[i] - mean);
  return dist.expectation(sq);
}

double
objective_of(const Problem& p, const std::vector<std::vector<double>>& alpha_atoms)
{
  std::vector<double> resid = p.a;
  double penalty = 0.0;
  for (std::size_t s = 0; s < p.k(); ++s) {
    auto vals = p.spread(s, alpha_atoms[s]);
    for (std::size_t i = 0; i < resid.size(); ++i)
      resid[i] -= vals[i];
    std::vector<double> terms(p.index[s].atoms());
    for (std::size_t u = 0; u < terms.size(); ++u) {
      double v = alpha_atoms[s][u];
      terms[u] = p.index[s].mass(u) * v * v / (p.lambda[s] * p.rbar[s][u]);
    }
    penalty += pairwise_sum(terms);
  }
  return variance_on_support(*p.dist, resid) + penalty;
}

std::vector<MarginalTable>
tables_of(const Problem& p, const std::vector<std::vector<double>>& alpha_atoms)
{
  std::vector<MarginalTable> out;
  for (std::size_t s = 0; s < p.k(); ++s)
    out.push_back(make_table(p.index[s], alpha_atoms[s]));
  return out;
}

std::vector<std::vector<double>>
atoms_of(const Problem& p, const std::vector<MarginalTable>& alpha)
{
  if (alpha.size() != p.k())
    throw ValidationError("one alpha table per pattern is required");
  std::vector<std::vector<double>> out(p.k());
  for (std::size_t s = 0; s < p.k(); ++s) {
    const MarginalIndex& idx = p.index[s];
    for (std::size_t u = 0; u < idx.atoms(); ++u)
      out[s].push_back(alpha[s].lookup(idx.atom(u)));
  }
  return out;
}

Pattern
mask_to_pattern(unsigned mask, int d)
{
  Pattern s;
  for (int j = 0; j < d; ++j)
    if (mask & (1u << j))
      s.push_back(j);
  return s;
}

} // namespace

double
variance_of(const FiniteSupportDistribution& dist, const Functional& functional)
{
  std::vector<double> a(dist.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = functional(dist.point(i));
  return variance_on_support(dist, a);
}

std::vector<double>
normalized_shift(const MarginalIndex& index, const ShiftSpec& shifts)
{
  std::vector<double> r(index.atoms());
  std::vector<double> weighted(index.atoms());
  for (std::size_t u = 0; u < index.atoms(); ++u) {
    r[u] = shifts.evaluate(index.pattern(), index.atom(u));
    if (!(r[u] > 0.0) || !std::isfinite(r[u]))
      throw ValidationError("nonpositive shift for " + format_pattern(index.pattern()));
    weighted[u] = index.mass(u) * r[u];
  }
  double mean = pairwise_sum(weighted);
  for (double& v : r)
    v /= mean;
  return r;
}

double
objective_value(const FiniteSupportDistribution& dist,
                const PatternSet& patterns,
                const ShiftSpec& shifts,
                const std::vector<double>& lambda,
                const Functional& functional,
                const std::vector<MarginalTable>& alpha)
{
  Problem p(dist, patterns, shifts, lambda, functional);
  return objective_of(p, atoms_of(p, alpha));
}

double
stationarity_residual(const FiniteSupportDistribution& dist,
                      const PatternSet& patterns,
                      const ShiftSpec& shifts,
                      const std::vector<double>& lambda,
                      const Functional& functional,
                      const std::vector<MarginalTable>& alpha)
{
  Problem p(dist, patterns, shifts, lambda, functional);
  auto atoms = atoms_of(p, alpha);
  std::vector<double> star(dist.size());
  for (std::size_t i = 0; i < star.size(); ++i)
    star[i] = p.a[i] - p.theta;
  for (std::size_t s = 0; s < p.k(); ++s) {
    auto vals = p.spread(s, atoms[s]);
    for (std::size_t i = 0; i < star.size(); ++i)
      star[i] -= vals[i];
  }
  double worst = 0.0;
  for (std::size_t s = 0; s < p.k(); ++s) {
    const MarginalIndex& idx = p.index[s];
    auto cond = idx.conditional_mean(star);
    std::vector<double> terms(idx.atoms());
    for (std::size_t u = 0; u < idx.atoms(); ++u)
      terms[u] = idx.mass(u) * atoms[s][u] / (p.lambda[s] * p.rbar[s][u]);
    double centre = pairwise_sum(terms);
    for (std::size_t u = 0; u < idx.atoms(); ++u) {
      double lr = p.lambda[s] * p.rbar[s][u];
      worst = std::max(worst, std::fabs(lr * cond[u] - atoms[s][u] + lr * centre));
    }
  }
  return worst;
}

AlphaSolution
exact_minimize(const FiniteSupportDistribution& dist,
               const PatternSet& patterns,
               const ShiftSpec& shifts,
               const std::vector<double>& lambda,
               const Functional& functional)
{
  Problem p(dist, patterns, shifts, lambda, functional);
  std::size_t k = p.k();
  std::vector<std::size_t> offset(k + 1, 0);
  for (std::size_t s = 0; s < k; ++s)
    offset[s + 1] = offset[s] + p.index[s].atoms();
  std::size_t unknowns = offset[k] + k;

  // Row (S, u): alpha_S(u)/(lambda rbar) + sum_{S'} E[alpha_S'(X_S') | X_S = u]
  //             - k_S = E[a | X_S = u] - theta.
  // Row S:      sum_u f_S(u) alpha_S(u) = 0.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(unknowns),
                                            static_cast<Eigen::Index>(unknowns));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknowns));
  for (std::size_t s = 0; s < k; ++s) {
    const MarginalIndex& idx = p.index[s];
    auto cond_a = idx.conditional_mean(p.a);
    for (std::size_t u = 0; u < idx.atoms(); ++u) {
      auto row = static_cast<Eigen::Index>(offset[s] + u);
      A(row, row) += 1.0 / (p.lambda[s] * p.rbar[s][u]);
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t i : idx.members(u)) {
          auto col = static_cast<Eigen::Index>(offset[t] + p.index[t].atom_of(i));
          A(row, col) += dist.probability(i) / idx.mass(u);
        }
      A(row, static_cast<Eigen::Index>(offset[k] + s)) = -1.0;
      rhs(row) = cond_a[u] - p.theta;
    }
    auto crow = static_cast<Eigen::Index>(offset[k] + s);
    for (std::size_t u = 0; u < idx.atoms(); ++u)
      A(crow, static_cast<Eigen::Index>(offset[s] + u)) = idx.mass(u);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw NumericalError("degenerate support: singular stationarity system");
  Eigen::VectorXd x = lu.solve(rhs);

  std::vector<std::vector<double>> atoms(k);
  AlphaSolution sol;
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t u = 0; u < p.index[s].atoms(); ++u)
      atoms[s].push_back(x(static_cast<Eigen::Index>(offset[s] + u)));
    sol.constants.push_back(x(static_cast<Eigen::Index>(offset[k] + s)));
  }
  sol.alpha = tables_of(p, atoms);
  sol.objective = objective_of(p, atoms);
  sol.residual = stationarity_residual(dist, patterns, shifts, lambda, functional, sol.alpha);
  return sol;
}

std::vector<AlphaSolution>
gradient_descent_alpha(const FiniteSupportDistribution& dist,
                       const PatternSet& patterns,
                       const ShiftSpec& shifts,
                       const std::vector<double>& lambda,
                       const Functional& functional,
                       int M,
                       double eta)
{
  if (M < 0)
    throw ValidationError("M must be nonnegative");
  if (!(eta > 0.0 && eta <= 1.0))
    throw ValidationError("eta must lie in (0, 1]");
  Problem p(dist, patterns, shifts, lambda, functional);
  std::size_t k = p.k();
  std::vector<std::vector<double>> atoms(k);
  for (std::size_t s = 0; s < k; ++s)
    atoms[s].assign(p.index[s].atoms(), 0.0);

  std::vector<AlphaSolution> out;
  auto record = [&] {
    AlphaSolution sol;
    sol.alpha = tables_of(p, atoms);
    sol.objective = objective_of(p, atoms);
    out.push_back(std::move(sol));
  };
  record();
  for (int m = 0; m < M; ++m) {
    std::vector<std::vector<double>> spread(k);
    for (std::size_t s = 0; s < k; ++s)
      spread[s] = p.spread(s, atoms[s]);
    std::vector<std::vector<double>> next(k);
    std::vector<double> g(dist.size());
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        double total = p.a[i];
        for (std::size_t t = 0; t < k; ++t)
          if (t != s)
            total -= spread[t][i];
        g[i] = total;
      }
      auto step = p.project_step(s, g);
      next[s].resize(step.size());
      for (std::size_t u = 0; u < step.size(); ++u)
        next[s][u] = (1.0 - eta) * atoms[s][u] + eta * step[u];
    }
    atoms = std::move(next);
    record();
  }
  return out;
}

std::vector<MarginalTable>
approx_influence_chains(const FiniteSupportDistribution& dist,
                        const PatternSet& patterns,
                        const ShiftSpec& shifts,
                        const std::vector<double>& lambda,
                        const Functional& functional,
                        int M,
                        double eta,
                        std::uint64_t max_chains)
{
  if (M < 0)
    throw ValidationError("M must be nonnegative");
  Problem p(dist, patterns, shifts, lambda, functional);
  std::size_t k = p.k();
  std::vector<std::vector<double>> atoms(k);
  for (std::size_t s = 0; s < k; ++s)
    atoms[s].assign(p.index[s].atoms(), 0.0);
  if (M == 0)
    return tables_of(p, atoms);
  double per_terminal = static_cast<double>(k) * std::pow(static_cast<double>(k - 1), M - 1);
  if (per_terminal > static_cast<double>(max_chains))
    throw ValidationError("chain enumeration exceeds the configured cap");

  auto b = BinomialWeights::make(M, eta);
  std::function<void(int, std::size_t, const std::vector<double>&)> visit =
    [&](int depth, std::size_t last, const std::vector<double>& abar) {
      // abar: chain of length depth ending in `last`, per atom of `last`.
      double coefficient = (depth % 2 == 1 ? 1.0 : -1.0) * b(depth);
      for (std::size_t u = 0; u < abar.size(); ++u)
        atoms[last][u] += coefficient * abar[u];
      if (depth == M)
        return;
      auto g = p.spread(last, abar);
      for (std::size_t s = 0; s < k; ++s)
        if (s != last)
          visit(depth + 1, s, p.project_step(s, g));
    };
  for (std::size_t s = 0; s < k; ++s)
    visit(1, s, p.project_step(s, p.a));
  return tables_of(p, atoms);
}

double
condition_number(const FiniteSupportDistribution& dist,
                 const PatternSet& patterns,
                 const ShiftSpec& shifts,
                 const std::vector<double>& lambda)
{
  double c = 0.0;
  for (const auto& s : patterns.patterns()) {
    MarginalIndex idx(dist, s);
    auto rbar = normalized_shift(idx, shifts);
    c = std::max(c, *std::max_element(rbar.begin(), rbar.end()));
  }
  double lmax = *std::max_element(lambda.begin(), lambda.end());
  return static_cast<double>(patterns.size()) * (1.0 + c * lmax);
}

double
descent_gap_bound(double kappa, int M, double var_a)
{
  return kappa * std::pow(1.0 - 1.0 / kappa, M) * var_a;
}

GaussianOracle
gaussian_bivariate_oracle(double rho, double lambda1, double lambda2)
{
  if (!(std::fabs(rho) < 1.0))
    throw ValidationError("rho must lie in (-1, 1)");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw ValidationError("lambda must be nonnegative or +inf");
  // u_k = lambda_k / (1 + lambda_k) = 1 / (1 + 1/lambda_k), which is 1 at
  // +inf and 0 at 0. Multiplying numerator and denominator of the closed
  // form by u_1 u_2 gives expressions valid at both limits.
  auto u_of = [](double l) { return std::isinf(l) ? 1.0 : l / (1.0 + l); };
  double u1 = u_of(lambda1);
  double u2 = u_of(lambda2);
  double r2 = rho * rho;
  double den = 1.0 - r2 * r2 * u1 * u2;
  GaussianOracle out;
  out.L = 1.0 + r2 - 2.0 * r2 * (u1 + u2 - 2.0 * r2 * u1 * u2) / den;
  out.coefficient[0] = rho * u1 * (1.0 - r2 * u2) / den;
  out.coefficient[1] = rho * u2 * (1.0 - r2 * u1) / den;
  return out;
}

std::map<Pattern, std::vector<double>>
product_anova(const FiniteSupportDistribution& dist, const Functional& functional)
{
  int d = dist.dimension();
  if (d > 16)
    throw ValidationError("ANOVA expansion limited to d <= 16");
  std::vector<double> a(dist.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = functional(dist.point(i));
  double theta = dist.expectation(a);
  unsigned full = 1u << d;
  std::vector<std::vector<double>> tilde(full);
  tilde[0].assign(dist.size(), theta);
  std::map<Pattern, std::vector<double>> out;
  out[{}] = tilde[0];
  for (unsigned mask = 1; mask < full; ++mask) {
    MarginalIndex idx(dist, mask_to_pattern(mask, d));
    auto cur = idx.conditional_mean_on_support(a);
    // Proper subsets U of T, including the empty set.
    for (unsigned sub = (mask - 1) & mask;; sub = (sub - 1) & mask) {
      for (std::size_t i = 0; i < cur.size(); ++i)
        cur[i] -= tilde[sub][i];
      if (sub == 0)
        break;
    }
    tilde[mask] = cur;
    out[mask_to_pattern(mask, d)] = std::move(cur);
  }
  return out;
}

std::vector<MarginalTable>
product_case_alpha(const FiniteSupportDistribution& dist,
                   const PatternSet& patterns,
                   const std::vector<double>& lambda,
                   const Functional& functional)
{
  if (!dist.is_product())
    throw ValidationError("distribution is not of product form");
  if (lambda.size() != patterns.size())
    throw ValidationError("one lambda per pattern is required");
  auto anova = product_anova(dist, functional);
  std::vector<MarginalTable> out;
  for (std::size_t s = 0; s < patterns.size(); ++s) {
    const Pattern& S = patterns[s];
    std::vector<double> on_support(dist.size(), 0.0);
    for (const auto& [T, values] : anova) {
      if (T.empty() || !std::includes(S.begin(), S.end(), T.begin(), T.end()))
        continue;
      double cover = 1.0;
      for (std::size_t t = 0; t < patterns.size(); ++t)
        if (std::includes(patterns[t].begin(), patterns[t].end(), T.begin(), T.end()))
          cover += lambda[t];
      double w = lambda[s] / cover;
      for (std::size_t i = 0; i < on_support.size(); ++i)
        on_support[i] += w * values[i];
    }
    MarginalIndex idx(dist, S);
    std::vector<double> per_atom(idx.atoms());
    for (std::size_t u = 0; u < idx.atoms(); ++u)
      per_atom[u] = on_support[idx.members(u).front()];
    out.push_back(make_table(idx, std::move(per_atom)));
  }
  return out;
}

std::vector<int>
prefix_lengths(const PatternSet& patterns)
{
  std::vector<int> out;
  for (const auto& s : patterns.patterns()) {
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[j] != static_cast<int>(j))
        throw ValidationError("pattern " + format_pattern(s) + " is not a prefix {1..j}");
    out.push_back(static_cast<int>(s.size()));
  }
  return out;
}

MonotoneWeights
monotone_mcar_weights(const PatternSet& patterns, const std::vector<double>& lambda)
{
  auto len = prefix_lengths(patterns);
  if (lambda.size() != patterns.size())
    throw ValidationError("one lambda per pattern is required");
  int d = patterns.dimension();
  std::vector<double> lam(static_cast<std::size_t>(d), 0.0); // lam[j] for [j]
  for (std::size_t s = 0; s < len.size(); ++s)
    lam[static_cast<std::size_t>(len[s])] = lambda[s];
  MonotoneWeights w;
  w.d = d;
  w.w.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
  for (int j : len)
    for (int k = 1; k <= j; ++k) {
      double tail = 0.0;
      for (int l = k; l <= d - 1; ++l)
        tail += lam[static_cast<std::size_t>(l)];
      w.w[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
        lam[static_cast<std::size_t>(j)] / (1.0 + tail);
    }
  return w;
}

namespace {

//! Prefix conditional means of `values` on the support, for prefix length
//! j (j = 0 gives the overall mean).
std::vector<double>
prefix_mean(const FiniteSupportDistribution& dist, int j, std::span<const double> values)
{
  if (j == 0)
    return std::vector<double>(dist.size(), dist.expectation(values));
  Pattern s;
  for (int v = 0; v < j; ++v)
    s.push_back(v);
  return MarginalIndex(dist, s).conditional_mean_on_support(values);
}

MarginalTable
tabulate(const FiniteSupportDistribution& dist, const Pattern& s, const std::vector<double>& on_support)
{
  MarginalIndex idx(dist, s);
  std::vector<double> per_atom(idx.atoms());
  for (std::size_t u = 0; u < idx.atoms(); ++u)
    per_atom[u] = on_support[idx.members(u).front()];
  return make_table(idx, std::move(per_atom));
}

} // namespace

std::vector<MarginalTable>
monotone_mcar_alpha(const FiniteSupportDistribution& dist,
                    const PatternSet& patterns,
                    const std::vector<double>& lambda,
                    const Functional& functional)
{
  auto w = monotone_mcar_weights(patterns, lambda);
  auto len = prefix_lengths(patterns);
  int d = patterns.dimension();
  std::vector<double> a(dist.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = functional(dist.point(i));
  std::vector<std::vector<double>> cond(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j)
    cond[static_cast<std::size_t>(j)] = prefix_mean(dist, j, a);
  std::vector<MarginalTable> out;
  for (std::size_t s = 0; s < patterns.size(); ++s) {
    int j = len[s];
    std::vector<double> alpha(dist.size(), 0.0);
    for (int k = 1; k <= j; ++k) {
      double wk = w.w[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < alpha.size(); ++i)
        alpha[i] += wk * (cond[static_cast<std::size_t>(k)][i] - cond[static_cast<std::size_t>(k - 1)][i]);
    }
    out.push_back(tabulate(dist, patterns[s], alpha));
  }
  return out;
}

MonotoneShiftedSolution
monotone_shifted_alpha(const FiniteSupportDistribution& dist,
                       const PatternSet& patterns,
                       const std::vector<double>& lambda,
                       const ShiftSpec& shifts,
                       const Functional& functional)
{
  auto len = prefix_lengths(patterns);
  if (lambda.size() != patterns.size())
    throw ValidationError("one lambda per pattern is required");
  int d = patterns.dimension();
  if (dist.dimension() != d)
    throw ValidationError("pattern set and distribution differ in dimension");
  std::size_t N = dist.size();
  auto D = static_cast<std::size_t>(d);
  using Vec = std::vector<double>;

  std::vector<double> a(N);
  for (std::size_t i = 0; i < N; ++i)
    a[i] = functional(dist.point(i));
  double theta0 = dist.expectation(a);

  // R[j] = lambda_[j] rbar_[j] on the support, 0 for absent prefixes.
  std::vector<Vec> R(D + 1, Vec(N, 0.0));
  std::vector<int> present(D + 1, 0);
  for (std::size_t s = 0; s < patterns.size(); ++s) {
    auto j = static_cast<std::size_t>(len[s]);
    present[j] = 1;
    MarginalIndex idx(dist, patterns[s]);
    auto rbar = normalized_shift(idx, shifts);
    for (std::size_t i = 0; i < N; ++i)
      R[j][i] = lambda[s] * rbar[idx.atom_of(i)];
  }

  // 1 / (1 + R_j mu_j) appears throughout.
  std::vector<Vec> mu(D, Vec(N, 1.0));
  auto damp = [&](std::size_t j) {
    Vec out(N);
    for (std::size_t i = 0; i < N; ++i)
      out[i] = 1.0 / (1.0 + R[j][i] * mu[j][i]);
    return out;
  };
  for (int j = d - 2; j >= 0; --j) {
    auto ju = static_cast<std::size_t>(j);
    auto q = damp(ju + 1);
    Vec g(N);
    for (std::size_t i = 0; i < N; ++i)
      g[i] = mu[ju + 1][i] * q[i];
    mu[ju] = prefix_mean(dist, j, g);
  }

  std::vector<Vec> at(D, Vec(N, 0.0));
  at[D - 1] = prefix_mean(dist, d - 1, a);
  for (double& v : at[D - 1])
    v -= theta0;
  for (int j = d - 2; j >= 1; --j) {
    auto ju = static_cast<std::size_t>(j);
    auto q = damp(ju + 1);
    Vec g(N);
    for (std::size_t i = 0; i < N; ++i)
      g[i] = mu[ju + 1][i] * at[ju + 1][i] * q[i];
    at[ju] = prefix_mean(dist, j, g);
    for (std::size_t i = 0; i < N; ++i)
      at[ju][i] /= mu[ju][i];
  }

  // nu[k][j] for k = 0..d-2 and j = 0..d-1.
  std::vector<std::vector<Vec>> nu(D > 1 ? D - 1 : 0, std::vector<Vec>(D, Vec(N, 0.0)));
  for (int k = 0; k + 1 < d; ++k) {
    auto ku = static_cast<std::size_t>(k);
    nu[ku][ku + 1].assign(N, 1.0);
    for (int j = k; j >= 1; --j) {
      auto ju = static_cast<std::size_t>(j);
      auto q = damp(ju + 1);
      Vec g(N);
      for (std::size_t i = 0; i < N; ++i)
        g[i] = nu[ku][ju + 1][i] * q[i];
      nu[ku][ju] = prefix_mean(dist, j, g);
    }
  }
  auto nu_over_mu = [&](std::size_t k, std::size_t j, std::size_t i) {
    if (j == 0)
      return 0.0;
    return nu[k][j][i] / mu[j][i];
  };

  // alpha_[j] = A_j + sum_l theta_l B_{j,l}, l over present prefixes.
  std::vector<std::size_t> unknown; // prefix lengths l with [l] present
  for (std::size_t l = 1; l < D; ++l)
    if (present[l])
      unknown.push_back(l);
  std::size_t P = unknown.size();
  std::vector<Vec> A(D, Vec(N, 0.0));
  std::vector<std::vector<Vec>> B(D, std::vector<Vec>(P, Vec(N, 0.0)));
  for (std::size_t j = 1; j < D; ++j) {
    if (!present[j])
      continue;
    for (std::size_t i = 0; i < N; ++i) {
      double rm = R[j][i] * mu[j][i];
      double lead = rm / (1.0 + rm);
      double prod = 1.0;
      // k runs downward so the product over m = k..j-1 accumulates.
      for (std::size_t k = j; k >= 1; --k) {
        if (k < j)
          prod /= 1.0 + R[k][i] * mu[k][i];
        A[j][i] += lead * prod * (at[k][i] - at[k - 1][i]);
        for (std::size_t p = 0; p < P; ++p) {
          std::size_t l = unknown[p];
          B[j][p][i] -= lead * prod * (nu_over_mu(l - 1, k, i) - nu_over_mu(l - 1, k - 1, i));
        }
      }
    }
  }

  MonotoneShiftedSolution sol;
  sol.theta.assign(D, 0.0);
  Eigen::MatrixXd sys(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(P));
  for (std::size_t r = 0; r < P; ++r) {
    std::size_t j = unknown[r];
    rhs(static_cast<Eigen::Index>(r)) = -dist.expectation(A[j]);
    for (std::size_t p = 0; p < P; ++p)
      sys(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = dist.expectation(B[j][p]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (P > 0 && !lu.isInvertible()) {
    auto exact = exact_minimize(dist, patterns, shifts, lambda, functional);
    sol.alpha = std::move(exact.alpha);
    sol.fallback = true;
    return sol;
  }
  Eigen::VectorXd th = P > 0 ? Eigen::VectorXd(lu.solve(rhs)) : Eigen::VectorXd();
  for (std::size_t p = 0; p < P; ++p)
    sol.theta[unknown[p]] = th(static_cast<Eigen::Index>(p));

  for (std::size_t s = 0; s < patterns.size(); ++s) {
    auto j = static_cast<std::size_t>(len[s]);
    Vec alpha = A[j];
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t i = 0; i < N; ++i)
        alpha[i] += th(static_cast<Eigen::Index>(p)) * B[j][p][i];
    sol.alpha.push_back(tabulate(dist, patterns[s], alpha));
  }
  return sol;
}

} // namespace fusemean
