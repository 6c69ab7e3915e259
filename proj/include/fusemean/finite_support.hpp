#pragma once

#include "fusemean/core_model.hpp"

#include <span>
#include <vector>

namespace fusemean {

//! Discrete distribution on finitely many distinct points of R^d.
class FiniteSupportDistribution
{
public:
  //! Throws ValidationError unless points are distinct, share one dimension,
  //! probabilities are positive and sum to 1 within 1e-12.
  FiniteSupportDistribution(std::vector<std::vector<double>> support,
                            std::vector<double> probabilities);

  //! Product of independent coordinate marginals, each given as atoms and
  //! probabilities.
  static FiniteSupportDistribution product(const std::vector<std::vector<double>>& atoms,
                                           const std::vector<std::vector<double>>& probabilities);

  int dimension() const { return d_; }
  std::size_t size() const { return support_.size(); }
  std::span<const double> point(std::size_t i) const { return support_[i]; }
  double probability(std::size_t i) const { return prob_[i]; }
  const std::vector<double>& probabilities() const { return prob_; }

  //! E[g(X)] for values of g on the support.
  double expectation(std::span<const double> values) const;

  //! True when the distribution factorizes over coordinates (within 1e-12).
  bool is_product() const;

private:
  int d_ = 0;
  std::vector<std::vector<double>> support_;
  std::vector<double> prob_;
};

//! Support points grouped by their exact S-coordinates. Atoms are sorted
//! lexicographically.
class MarginalIndex
{
public:
  MarginalIndex(const FiniteSupportDistribution& dist, Pattern pattern);

  const Pattern& pattern() const { return pattern_; }
  std::size_t atoms() const { return atoms_.size(); }
  const std::vector<double>& atom(std::size_t u) const { return atoms_[u]; }
  double mass(std::size_t u) const { return mass_[u]; }
  //! Atom of support point i.
  std::size_t atom_of(std::size_t i) const { return atom_of_[i]; }
  //! Support points in atom u.
  const std::vector<std::size_t>& members(std::size_t u) const { return members_[u]; }

  //! E[g(X) | X_S = atom u] for every atom.
  std::vector<double> conditional_mean(std::span<const double> values) const;

  //! The conditional mean spread back over the support points.
  std::vector<double> conditional_mean_on_support(std::span<const double> values) const;

  //! Atom index of x_S; throws ValidationError when absent.
  std::size_t find(std::span<const double> x_s) const;

private:
  const FiniteSupportDistribution* dist_;
  Pattern pattern_;
  std::vector<std::vector<double>> atoms_;
  std::vector<double> mass_;
  std::vector<std::size_t> atom_of_;
  std::vector<std::vector<std::size_t>> members_;
};

//! A function of x_S tabulated on the marginal atoms of S.
struct MarginalTable
{
  Pattern pattern;
  std::vector<std::vector<double>> atoms; //!< sorted
  std::vector<double> values;

  //! Throws ValidationError("missing table entry") for an unknown atom.
  double lookup(std::span<const double> x_s) const;

  //! Value at support point i of the distribution that `index` describes.
  double at_support(const MarginalIndex& index, std::size_t i) const
  {
    return values[index.atom_of(i)];
  }
};

//! A table of zeros on the atoms of `index`.
MarginalTable zero_table(const MarginalIndex& index);

//! Tabulates per-atom values (ordered as index atoms).
MarginalTable make_table(const MarginalIndex& index, std::vector<double> values);

} // namespace fusemean
