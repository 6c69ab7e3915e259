#pragma once

#include <cstddef>
#include <span>

namespace fusemean {

//! Pairwise (tree) summation. The reduction order depends only on the
//! length of the input, so results are reproducible however the terms were
//! produced.
double pairwise_sum(std::span<const double> values);

//! Pairwise mean; throws std::invalid_argument on empty input.
double pairwise_mean(std::span<const double> values);

} // namespace fusemean
