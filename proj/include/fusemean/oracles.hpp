#pragma once

#include "fusemean/core_model.hpp"
#include "fusemean/finite_support.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

//! Population-level ground truth on finite-support distributions plus the
//! Gaussian closed form. `lambda` vectors are indexed like the pattern set
//! and must be positive and finite.
namespace fusemean {

struct AlphaSolution
{
  std::vector<MarginalTable> alpha; //!< per pattern
  double objective = 0.0;
  //! Lagrange constants of the mean-zero constraints (exact_minimize).
  std::vector<double> constants;
  //! Sup-norm stationarity residual, where computed.
  double residual = 0.0;
  std::vector<std::string> notes;
};

//! Var a(X) under the distribution.
double variance_of(const FiniteSupportDistribution& dist, const Functional& functional);

//! r_S / E[r_S] on the marginal atoms of `index`.
std::vector<double> normalized_shift(const MarginalIndex& index, const ShiftSpec& shifts);

//! L(alpha) = Var(a - sum alpha_S) + sum_S E[alpha_S^2 / (lambda_S rbar_S)].
double objective_value(const FiniteSupportDistribution& dist,
                       const PatternSet& patterns,
                       const ShiftSpec& shifts,
                       const std::vector<double>& lambda,
                       const Functional& functional,
                       const std::vector<MarginalTable>& alpha);

//! max over S and atoms of
//! |lambda rbar E[alpha* | X_S] - alpha_S + lambda rbar E[alpha_S/(lambda rbar)]|
//! with alpha* = a - theta - sum alpha_S.
double stationarity_residual(const FiniteSupportDistribution& dist,
                             const PatternSet& patterns,
                             const ShiftSpec& shifts,
                             const std::vector<double>& lambda,
                             const Functional& functional,
                             const std::vector<MarginalTable>& alpha);

//! Unique minimizer of L over mean-zero alpha, from the stationarity
//! conditions as one dense linear system (tables on every marginal atom,
//! one Lagrange constant per pattern).
AlphaSolution exact_minimize(const FiniteSupportDistribution& dist,
                             const PatternSet& patterns,
                             const ShiftSpec& shifts,
                             const std::vector<double>& lambda,
                             const Functional& functional);

//! Iterates alpha^{(0)}, ..., alpha^{(M)} of gradient descent started at 0:
//! alpha_S <- (1-eta) alpha_S + eta P_S(a - sum_{S' != S} alpha_S'), where
//! P_S(g) = w_S (E[g | X_S] - int w_S g f / int w_S f_S) and
//! w_S = lambda_S rbar_S / (1 + lambda_S rbar_S). Each iterate equals the
//! binomial-tail chain sum; see approx_influence_chains.
std::vector<AlphaSolution> gradient_descent_alpha(const FiniteSupportDistribution& dist,
                                                  const PatternSet& patterns,
                                                  const ShiftSpec& shifts,
                                                  const std::vector<double>& lambda,
                                                  const Functional& functional,
                                                  int M,
                                                  double eta);

//! alpha^{(M)} from the explicit chain sum with binomial-tail weights.
//! Throws ValidationError beyond `max_chains` chains per terminal pattern.
std::vector<MarginalTable> approx_influence_chains(const FiniteSupportDistribution& dist,
                                                   const PatternSet& patterns,
                                                   const ShiftSpec& shifts,
                                                   const std::vector<double>& lambda,
                                                   const Functional& functional,
                                                   int M,
                                                   double eta,
                                                   std::uint64_t max_chains = 100000);

//! kappa = |S| (1 + C lambda_max) with C the largest rbar_S on the support.
double condition_number(const FiniteSupportDistribution& dist,
                        const PatternSet& patterns,
                        const ShiftSpec& shifts,
                        const std::vector<double>& lambda);

//! kappa (1 - 1/kappa)^M Var a.
double descent_gap_bound(double kappa, int M, double var_a);

struct GaussianOracle
{
  double L = 0.0;
  //! alpha_k(x) = coefficient[k] (x^2 - 1).
  double coefficient[2] = { 0.0, 0.0 };
};

//! Bivariate standard Gaussian with correlation rho, a = x1 x2, patterns
//! {1},{2}, MCAR. lambda may be +infinity; 0 gives the complete-data limit.
GaussianOracle gaussian_bivariate_oracle(double rho, double lambda1, double lambda2);

//! Centred ANOVA components a~_T on the support for every T in [d]
//! (keyed by sorted 0-based pattern, empty pattern holds theta).
std::map<Pattern, std::vector<double>> product_anova(const FiniteSupportDistribution& dist,
                                                     const Functional& functional);

//! Closed-form minimizer for product distributions under MCAR.
//! Throws ValidationError when the distribution does not factorize.
std::vector<MarginalTable> product_case_alpha(const FiniteSupportDistribution& dist,
                                              const PatternSet& patterns,
                                              const std::vector<double>& lambda,
                                              const Functional& functional);

//! w[j][k] = lambda_[j] / (1 + sum_{l >= k} lambda_[l]) for 1 <= k <= j <= d-1,
//! lambda_[l] = 0 for absent prefixes. Rows for absent j are zero.
struct MonotoneWeights
{
  int d = 0;
  std::vector<std::vector<double>> w; //!< (d) x (d), 1-based use
};

//! Throws ValidationError unless every pattern is a prefix {1..j}, j < d.
MonotoneWeights monotone_mcar_weights(const PatternSet& patterns, const std::vector<double>& lambda);

//! Prefix length j of each pattern; validates nesting.
std::vector<int> prefix_lengths(const PatternSet& patterns);

//! Composes the weights with exact prefix conditional means a_[k]
//! (a_[0] = theta).
std::vector<MarginalTable> monotone_mcar_alpha(const FiniteSupportDistribution& dist,
                                               const PatternSet& patterns,
                                               const std::vector<double>& lambda,
                                               const Functional& functional);

struct MonotoneShiftedSolution
{
  std::vector<MarginalTable> alpha;
  std::vector<double> theta; //!< theta_1..theta_{d-1} (index 0 unused)
  bool fallback = false;     //!< true when the theta system was singular
};

//! Backward recursions for mu_j, a~_j and nu_j^k on nested prefixes, then
//! the constants theta_l that make every alpha_[j] mean zero. Falls back to
//! exact_minimize when that system is singular.
MonotoneShiftedSolution monotone_shifted_alpha(const FiniteSupportDistribution& dist,
                                               const PatternSet& patterns,
                                               const std::vector<double>& lambda,
                                               const ShiftSpec& shifts,
                                               const Functional& functional);

} // namespace fusemean
