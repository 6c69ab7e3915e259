#pragma once

#include "fusemean/core_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fusemean {

//! (n)_m = n (n-1) ... (n-m+1). Throws ValidationError for m > n and
//! NumericalError on 64-bit overflow.
std::uint64_t falling_factorial(std::uint64_t n, std::uint64_t m);

enum class Enumeration
{
  EXACT,
  SUBSAMPLED
};

struct UStatConfig
{
  int M = 0;
  double h = 0.5;
  //! Defaults to 1/|S| when unset.
  std::optional<double> eta;
  Enumeration enumeration = Enumeration::EXACT;
  //! Tuples per term for SUBSAMPLED.
  std::uint64_t budget = 1000000;
  std::uint64_t seed = 0;
  //! EXACT limit on sum over m of (n)_{m+1} times the chain count.
  std::uint64_t exact_cap = 10000000;
};

struct UStatResult
{
  double theta = 0.0;
  //! Tuple averages per m (index 0 is the complete-case mean); the chain
  //! weights and signs are not applied.
  std::vector<double> term_averages;
  std::vector<std::uint64_t> tuples_per_term;
  std::vector<std::string> warnings;
};

//! Chain weight v = prod_j (1 + n/n_{S_j})^{-1} over the listed pattern
//! indices; 1 for an empty list.
double chain_weight(const FusedDataset& data,
                    const PatternSet& patterns,
                    const std::vector<std::size_t>& chain);

//! Direct estimator without sample splitting, for MCAR data, using the
//! pooled boxcar density with half-width support.
UStatResult ustat_estimate(const FusedDataset& data,
                           const PatternSet& patterns,
                           const Functional& functional,
                           const UStatConfig& config);

} // namespace fusemean
