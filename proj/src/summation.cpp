#include "fusemean/summation.hpp"

#include <stdexcept>

namespace fusemean {

namespace {

constexpr std::size_t kLeafSize = 16;

double
tree_sum(const double* x, std::size_t n)
{
  if (n <= kLeafSize) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return tree_sum(x, half) + tree_sum(x + half, n - half);
}

} // namespace

double
pairwise_sum(std::span<const double> values)
{
  return tree_sum(values.data(), values.size());
}

double
pairwise_mean(std::span<const double> values)
{
  if (values.empty())
    throw std::invalid_argument("pairwise_mean: empty input");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

} // namespace fusemean
