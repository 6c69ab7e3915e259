#pragma once

#include "fusemean/core_model.hpp"
#include "fusemean/matrix.hpp"

#include <span>

namespace fusemean {

enum class KernelFamily
{
  //! 2^{-d} on the sup-norm ball of radius 1.
  UNIFORM_FULL,
  //! 1 on the sup-norm ball of radius 1/2.
  UNIFORM_HALF
};

//! Marginal boxcar kernel K_h^S for a pattern S. All sample matrices and
//! points handed to the functions below are already restricted to the S
//! coordinates (|S| columns).
struct MarginalKernel
{
  Pattern pattern;
  double h = 1.0;
  KernelFamily family = KernelFamily::UNIFORM_FULL;

  std::size_t arity() const { return pattern.size(); }
  //! Support radius in sup-norm: h (full) or h/2 (half). Inclusive.
  double radius() const;
  //! Kernel value inside the support.
  double height() const;
};

//! Throws ValidationError unless h is in (0, 1] and the pattern is nonempty.
void check_kernel(const MarginalKernel& k);

//! True when ||x - y||_inf <= radius.
bool in_support(const MarginalKernel& k, std::span<const double> x, std::span<const double> y);

double kernel_weight(const MarginalKernel& k, std::span<const double> x_s, std::span<const double> y_s);

//! Number of sample rows within the kernel support around x_s.
std::size_t support_count(const MarginalKernel& k, const Matrix& sample_s, std::span<const double> x_s);

//! Mean kernel weight over the rows of `sample_s`.
double density_estimate(const MarginalKernel& k, const Matrix& sample_s, std::span<const double> x_s);

//! Pooled estimate (n + n_S)^{-1} (sum over both blocks).
double pooled_density(const MarginalKernel& k,
                      const Matrix& complete_s,
                      const Matrix& incomplete_s,
                      std::span<const double> x_s);

//! Nadaraya-Watson regression with the boxcar kernel; 0 when no row is in
//! the support.
double nw_regress(const MarginalKernel& k,
                  std::span<const double> responses,
                  const Matrix& covariates_s,
                  std::span<const double> x_s);

} // namespace fusemean
