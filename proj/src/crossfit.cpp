#include "fusemean/crossfit.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/parallel.hpp"
#include "fusemean/summation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fusemean {

namespace {

//! Lower-tail quantile, Acklam (2003) coefficients.
double
acklam_lower(double p)
{
  static const double a[] = { -3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00 };
  static const double b[] = { -5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01 };
  static const double c[] = { -7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00 };
  static const double d[] = { 7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00 };
  const double low = 0.02425;
  if (p < low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - low) {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace

double
normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double
normal_upper_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("quantile level must lie in (0, 1)");
  // Solve Phi(x) = p for the lower quantile, then negate.
  double x = acklam_lower(p);
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return -x;
}

double
complete_case_mean(const FusedDataset& data, const Functional& functional)
{
  if (data.n() == 0)
    throw ValidationError("empty complete block");
  std::vector<double> values(data.n());
  parallel_for(values.size(), [&](std::size_t i) { values[i] = functional(data.complete.row(i)); });
  return pairwise_mean(values);
}

namespace {

std::vector<double>
shift_means(const Matrix& rows, const PatternSet& patterns, const ShiftSpec& shifts)
{
  std::vector<double> out;
  std::vector<double> r(rows.rows());
  for (const auto& s : patterns.patterns()) {
    for (std::size_t i = 0; i < rows.rows(); ++i)
      r[i] = shifts.evaluate_full(s, rows.row(i));
    out.push_back(pairwise_mean(r));
  }
  return out;
}

} // namespace

void
variance_and_ci(EstimateReport& report, double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie in (0, 1)");
  double total = 0.0;
  for (int l = 0; l < 2; ++l) {
    const auto& half = report.halves[static_cast<std::size_t>(l)];
    report.v_half[static_cast<std::size_t>(l)] =
      half.mean_square - report.theta_hat * report.theta_hat;
    total += report.v_half[static_cast<std::size_t>(l)];
    for (double v : half.v_pattern)
      total += v;
  }
  report.v_hat = std::max(0.0, 0.5 * total);
  double z = normal_upper_quantile(alpha / 2.0);
  double half_width = z * std::sqrt(report.v_hat / static_cast<double>(report.n));
  report.ci = { report.theta_hat - half_width, report.theta_hat + half_width, alpha };
  if (report.v_hat == 0.0)
    report.diagnostics.warnings.emplace_back("variance estimate is zero; interval is degenerate");
}

EstimateReport
estimate(const FusedDataset& data,
         const PatternSet& patterns,
         const ShiftSpec& shifts,
         const Functional& functional,
         const EstimatorConfig& config,
         double alpha)
{
  require_valid(data, patterns, shifts);
  std::size_t n = data.n();
  if (n < 2 * static_cast<std::size_t>(std::max(config.M, 1)))
    throw ValidationError("insufficient data for M folds");

  EstimateReport report;
  report.config = config;
  report.n = n;
  FoldPlan plan = make_fold_plan(n, config.M, config.seed);
  std::size_t k = patterns.size();

  std::array<Matrix, 2> half_rows = { data.complete.select_rows(plan.halves[0]),
                                      data.complete.select_rows(plan.halves[1]) };
  std::array<std::vector<double>, 2> r_hat = { shift_means(half_rows[0], patterns, shifts),
                                               shift_means(half_rows[1], patterns, shifts) };

  for (int l = 0; l < 2; ++l) {
    auto lu = static_cast<std::size_t>(l);
    auto other = 1 - lu;
    auto alpha_hat = assemble_alpha(data, patterns, shifts, functional, plan, l, config);
    const Matrix& avg = half_rows[other];

    std::vector<double> resid(avg.rows());
    parallel_for(avg.rows(), [&](std::size_t i) { resid[i] = functional(avg.row(i)); });
    std::vector<std::vector<double>> alpha_on_avg(k);
    for (std::size_t s = 0; s < k; ++s) {
      alpha_on_avg[s] = alpha_hat[s].evaluate_full_rows(avg);
      for (std::size_t i = 0; i < avg.rows(); ++i)
        resid[i] -= alpha_on_avg[s][i];
    }
    std::vector<double> squares(resid.size());
    for (std::size_t i = 0; i < resid.size(); ++i)
      squares[i] = resid[i] * resid[i];

    HalfComponents comp;
    comp.fit_size = plan.halves[lu].size();
    comp.average_size = avg.rows();
    comp.r_hat = r_hat[lu];
    comp.mean_square = pairwise_mean(squares);
    double theta = pairwise_mean(resid);

    for (std::size_t s = 0; s < k; ++s) {
      const Pattern& pat = patterns[s];
      const Matrix& block = data.incomplete.at(pat);
      auto on_block = alpha_hat[s].evaluate_local_rows(block);
      for (std::size_t j = 0; j < block.rows(); ++j)
        on_block[j] *= r_hat[other][s] / shifts.evaluate(pat, block.row(j));
      theta += pairwise_mean(on_block);

      std::vector<double> terms(avg.rows());
      double n_s = static_cast<double>(block.rows());
      for (std::size_t i = 0; i < avg.rows(); ++i) {
        double a = alpha_on_avg[s][i];
        terms[i] = r_hat[lu][s] * a * a / (n_s * shifts.evaluate_full(pat, avg.row(i)));
      }
      comp.v_pattern.push_back(static_cast<double>(n) / static_cast<double>(avg.rows()) *
                               pairwise_sum(terms));
    }
    comp.theta = theta;
    report.halves[lu] = std::move(comp);
  }

  report.theta_hat = (static_cast<double>(plan.halves[1].size()) * report.halves[0].theta +
                      static_cast<double>(plan.halves[0].size()) * report.halves[1].theta) /
                     static_cast<double>(n);

  auto& diag = report.diagnostics;
  diag.half_sizes = { plan.halves[0].size(), plan.halves[1].size() };
  for (int l = 0; l < 2; ++l)
    for (const auto& piece : plan.pieces[static_cast<std::size_t>(l)])
      diag.piece_sizes[static_cast<std::size_t>(l)].push_back(piece.size());
  for (int m = 1; m <= config.M; ++m)
    diag.chain_count += chain_count(k, m);
  std::size_t outside = 0;
  for (std::size_t i = 0; i < n; ++i)
    outside += sup_norm(data.complete.row(i)) > config.T ? 1 : 0;
  diag.complete_truncation_rate = static_cast<double>(outside) / static_cast<double>(n);
  for (const auto& pat : patterns.patterns()) {
    const Matrix& block = data.incomplete.at(pat);
    std::size_t out = 0;
    for (std::size_t j = 0; j < block.rows(); ++j)
      out += sup_norm(block.row(j)) > config.T ? 1 : 0;
    diag.incomplete_truncation_rate.push_back(static_cast<double>(out) /
                                              static_cast<double>(block.rows()));
  }

  variance_and_ci(report, alpha);
  return report;
}

} // namespace fusemean
