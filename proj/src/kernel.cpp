#include "fusemean/kernel.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/summation.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fusemean {

double
MarginalKernel::radius() const
{
  return family == KernelFamily::UNIFORM_FULL ? h : 0.5 * h;
}

double
MarginalKernel::height() const
{
  double base = family == KernelFamily::UNIFORM_FULL ? 0.5 / h : 1.0 / h;
  return std::pow(base, static_cast<double>(pattern.size()));
}

void
check_kernel(const MarginalKernel& k)
{
  if (!(k.h > 0.0 && k.h <= 1.0))
    throw ValidationError("bandwidth must lie in (0, 1]");
  if (k.pattern.empty())
    throw ValidationError("kernel pattern is empty");
}

namespace {

void
check_dim(const MarginalKernel& k, std::size_t got)
{
  if (got != k.arity())
    throw ValidationError("kernel dimension mismatch: expected " + std::to_string(k.arity()) +
                          ", got " + std::to_string(got));
}

inline bool
inside(const double* x, const double* y, std::size_t dim, double radius)
{
  for (std::size_t j = 0; j < dim; ++j)
    if (!(std::fabs(x[j] - y[j]) <= radius))
      return false;
  return true;
}

} // namespace

bool
in_support(const MarginalKernel& k, std::span<const double> x, std::span<const double> y)
{
  check_dim(k, x.size());
  check_dim(k, y.size());
  return inside(x.data(), y.data(), x.size(), k.radius());
}

double
kernel_weight(const MarginalKernel& k, std::span<const double> x_s, std::span<const double> y_s)
{
  return in_support(k, x_s, y_s) ? k.height() : 0.0;
}

std::size_t
support_count(const MarginalKernel& k, const Matrix& sample_s, std::span<const double> x_s)
{
  check_dim(k, x_s.size());
  if (!sample_s.empty())
    check_dim(k, sample_s.cols());
  double radius = k.radius();
  std::size_t dim = x_s.size();
  std::size_t count = 0;
  const double* row = sample_s.data().data();
  for (std::size_t i = 0; i < sample_s.rows(); ++i, row += dim)
    count += inside(row, x_s.data(), dim, radius) ? 1 : 0;
  return count;
}

double
density_estimate(const MarginalKernel& k, const Matrix& sample_s, std::span<const double> x_s)
{
  if (sample_s.empty())
    throw ValidationError("density estimate on an empty sample");
  auto count = static_cast<double>(support_count(k, sample_s, x_s));
  return k.height() * count / static_cast<double>(sample_s.rows());
}

double
pooled_density(const MarginalKernel& k,
               const Matrix& complete_s,
               const Matrix& incomplete_s,
               std::span<const double> x_s)
{
  std::size_t total = complete_s.rows() + incomplete_s.rows();
  if (total == 0)
    throw ValidationError("pooled density on an empty sample");
  auto count = static_cast<double>(support_count(k, complete_s, x_s) +
                                   support_count(k, incomplete_s, x_s));
  return k.height() * count / static_cast<double>(total);
}

double
nw_regress(const MarginalKernel& k,
           std::span<const double> responses,
           const Matrix& covariates_s,
           std::span<const double> x_s)
{
  if (responses.size() != covariates_s.rows())
    throw ValidationError("responses and covariates differ in length");
  check_dim(k, x_s.size());
  if (covariates_s.empty())
    return 0.0;
  check_dim(k, covariates_s.cols());
  thread_local std::vector<double> picked;
  picked.clear();
  double radius = k.radius();
  std::size_t dim = x_s.size();
  const double* row = covariates_s.data().data();
  for (std::size_t i = 0; i < covariates_s.rows(); ++i, row += dim)
    if (inside(row, x_s.data(), dim, radius))
      picked.push_back(responses[i]);
  if (picked.empty())
    return 0.0;
  return pairwise_sum(picked) / static_cast<double>(picked.size());
}

} // namespace fusemean
