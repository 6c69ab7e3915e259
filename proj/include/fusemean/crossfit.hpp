#pragma once

#include "fusemean/core_model.hpp"
#include "fusemean/influence.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fusemean {

//! Upper-tail standard normal quantile: P(Z > z) = p, p in (0, 1).
//! Acklam's rational approximation refined by one Halley step.
double normal_upper_quantile(double p);

//! Standard normal CDF.
double normal_cdf(double x);

//! Plain mean of a over the complete rows.
double complete_case_mean(const FusedDataset& data, const Functional& functional);

//! Quantities computed on one half l (alpha fitted on D_l, averaged on
//! D_{3-l}).
struct HalfComponents
{
  std::size_t fit_size = 0;      //!< |D_l|
  std::size_t average_size = 0;  //!< |D_{3-l}|
  double theta = 0.0;            //!< theta_hat_(l)
  double mean_square = 0.0;      //!< mean over D_{3-l} of (a - sum alpha)^2
  std::vector<double> v_pattern; //!< V_S^{(l)} per pattern
  std::vector<double> r_hat;     //!< r_hat_{S,(l)} per pattern
};

struct ConfidenceInterval
{
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
};

struct EstimateDiagnostics
{
  std::array<std::size_t, 2> half_sizes{};
  std::array<std::vector<std::size_t>, 2> piece_sizes;
  //! Chains represented across depths 1..M.
  std::uint64_t chain_count = 0;
  //! Fraction of complete rows outside the truncation ball.
  double complete_truncation_rate = 0.0;
  //! Per pattern, fraction of incomplete rows with ||x_S|| > T.
  std::vector<double> incomplete_truncation_rate;
  std::vector<std::string> warnings;
};

struct EstimateReport
{
  double theta_hat = 0.0;
  double v_hat = 0.0;
  ConfidenceInterval ci;
  std::array<HalfComponents, 2> halves;
  std::array<double, 2> v_half{}; //!< V^{(l)}
  EstimatorConfig config;
  std::size_t n = 0;
  EstimateDiagnostics diagnostics;
};

//! Cross-fitted point estimate, variance and interval. Validates the input
//! first and requires n >= 2 max(M, 1).
EstimateReport estimate(const FusedDataset& data,
                        const PatternSet& patterns,
                        const ShiftSpec& shifts,
                        const Functional& functional,
                        const EstimatorConfig& config,
                        double alpha = 0.05);

//! Fills v_half, v_hat and ci from the half components and theta_hat.
//! Throws ValidationError for alpha outside (0, 1).
void variance_and_ci(EstimateReport& report, double alpha);

} // namespace fusemean
