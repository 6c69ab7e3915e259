#pragma once

#include "fusemean/core_model.hpp"
#include "fusemean/crossfit.hpp"
#include "fusemean/finite_support.hpp"
#include "fusemean/ustat.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fusemean {

enum class Generator
{
  BIVARIATE_GAUSSIAN,
  TRIVARIATE_STANDARD_GAUSSIAN,
  PRODUCT_FINITE,
  CUSTOM_FINITE
};

std::string generator_name(Generator g);

struct Scenario
{
  Generator generator = Generator::BIVARIATE_GAUSSIAN;
  double rho = 0.0;                               //!< BIVARIATE_GAUSSIAN only
  std::optional<FiniteSupportDistribution> dist;  //!< finite generators only
  PatternSet patterns{ 2, { { 0 }, { 1 } } };
  std::vector<double> lambda;                     //!< targets, per pattern
  ShiftSpec shifts;
  Functional functional;
  std::size_t n = 0;
  std::size_t replications = 2;
  std::uint64_t seed = 0;
};

//! Dimension implied by the generator.
int scenario_dimension(const Scenario& s);

//! Throws ValidationError when the scenario is inconsistent.
void validate_scenario(const Scenario& s);

//! n_S = round(lambda_S n), per pattern.
std::vector<std::size_t> pattern_sizes(const Scenario& s);

//! Deterministic in (seed, replication). The complete block uses stream
//! stream_id(replication, 0) and pattern k uses stream_id(replication, 1 + k).
FusedDataset generate(const Scenario& s, std::uint64_t replication);

//! Nodes and weights for E[g(Z)], Z ~ N(0, 1) (weights sum to 1).
struct Quadrature
{
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_hermite(int points);

//! theta = E[a(X)]: exact on finite support, 40-point Gauss-Hermite product
//! rule for the Gaussian generators.
double true_theta(const Scenario& s);

//! Var a(X), computed the same way.
double true_variance(const Scenario& s);

//! inf L when an oracle applies: exact_minimize for finite generators, the
//! Gaussian closed form for the bivariate Gaussian with a = x1 x2, patterns
//! {1},{2} and MCAR. Uses the realized lambda_S = n_S / n.
std::optional<double> oracle_target(const Scenario& s);

enum class EstimatorKind
{
  CROSSFIT,
  USTAT,
  COMPLETE_CASE
};

std::string estimator_name(EstimatorKind k);

struct McConfig
{
  //! Cross-fit settings; default_config per dataset when unset. The fold
  //! seed of replication r is (this seed, or the scenario seed) + r.
  std::optional<EstimatorConfig> crossfit;
  UStatConfig ustat;
  double alpha = 0.05;
  std::size_t threads = 0;
};

struct MonteCarloSummary
{
  std::string estimator;
  std::string generator;
  std::size_t n = 0;
  std::size_t replications = 0;
  double theta_true = 0.0;
  double variance_a = 0.0;
  std::optional<double> oracle_target;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double bias_se = 0.0;
  double n_mse = 0.0;
  double n_mse_se = 0.0; //!< jackknife over replications
  std::optional<double> coverage;
  //! Paired comparison on the same datasets.
  double complete_case_n_mse = 0.0;
  double complete_case_n_mse_se = 0.0;
  double paired_difference = 0.0; //!< n_mse - complete_case_n_mse
  double paired_difference_se = 0.0;
  double wall_clock_seconds = 0.0;
  std::vector<double> estimates;
  std::vector<double> complete_case_estimates;
  std::vector<std::string> warnings;
};

//! Requires R >= 2. Every estimator sees the datasets generate(s, r),
//! r = 0..R-1; the reduction is in replication order.
MonteCarloSummary run_mc(const Scenario& s, EstimatorKind estimator, const McConfig& config);

//! Jackknife standard error of the mean of `values`.
double jackknife_mean_se(const std::vector<double>& values);

struct McMean
{
  double mean = 0.0;
  double se = 0.0;
};

//! E[a(X) | X_j = value] for X standard Gaussian in R^d, by drawing the other
//! coordinates independently.
McMean mc_conditional_mean(const Functional& functional,
                           int d,
                           int coordinate,
                           double value,
                           std::size_t samples,
                           std::uint64_t seed);

} // namespace fusemean
