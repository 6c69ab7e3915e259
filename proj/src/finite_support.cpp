#include "fusemean/finite_support.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/summation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace fusemean {

FiniteSupportDistribution::FiniteSupportDistribution(std::vector<std::vector<double>> support,
                                                     std::vector<double> probabilities)
  : support_(std::move(support))
  , prob_(std::move(probabilities))
{
  if (support_.empty())
    throw ValidationError("empty support");
  if (support_.size() != prob_.size())
    throw ValidationError("support and probabilities differ in length");
  d_ = static_cast<int>(support_.front().size());
  if (d_ < 1)
    throw ValidationError("support points must have positive dimension");
  std::set<std::vector<double>> seen;
  for (const auto& x : support_) {
    if (static_cast<int>(x.size()) != d_)
      throw ValidationError("support points differ in dimension");
    for (double v : x)
      if (!std::isfinite(v))
        throw ValidationError("non-finite support point");
    if (!seen.insert(x).second)
      throw ValidationError("duplicate support point");
  }
  for (double p : prob_)
    if (!(p > 0.0) || !std::isfinite(p))
      throw ValidationError("probabilities must be positive");
  if (std::fabs(pairwise_sum(prob_) - 1.0) > 1e-12)
    throw ValidationError("probabilities must sum to 1");
}

FiniteSupportDistribution
FiniteSupportDistribution::product(const std::vector<std::vector<double>>& atoms,
                                   const std::vector<std::vector<double>>& probabilities)
{
  if (atoms.empty() || atoms.size() != probabilities.size())
    throw ValidationError("product distribution needs atoms and probabilities per coordinate");
  std::vector<std::vector<double>> support{ {} };
  std::vector<double> prob{ 1.0 };
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (atoms[j].empty() || atoms[j].size() != probabilities[j].size())
      throw ValidationError("coordinate atoms and probabilities differ in length");
    std::vector<std::vector<double>> next_support;
    std::vector<double> next_prob;
    for (std::size_t i = 0; i < support.size(); ++i)
      for (std::size_t u = 0; u < atoms[j].size(); ++u) {
        auto x = support[i];
        x.push_back(atoms[j][u]);
        next_support.push_back(std::move(x));
        next_prob.push_back(prob[i] * probabilities[j][u]);
      }
    support = std::move(next_support);
    prob = std::move(next_prob);
  }
  return { std::move(support), std::move(prob) };
}

double
FiniteSupportDistribution::expectation(std::span<const double> values) const
{
  if (values.size() != prob_.size())
    throw ValidationError("expectation: value count mismatch");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    terms[i] = prob_[i] * values[i];
  return pairwise_sum(terms);
}

bool
FiniteSupportDistribution::is_product() const
{
  std::vector<std::map<double, double>> marginals(static_cast<std::size_t>(d_));
  for (std::size_t i = 0; i < size(); ++i)
    for (int j = 0; j < d_; ++j)
      marginals[static_cast<std::size_t>(j)][support_[i][static_cast<std::size_t>(j)]] += prob_[i];
  std::size_t grid = 1;
  for (const auto& m : marginals)
    grid *= m.size();
  if (grid != size())
    return false;
  for (std::size_t i = 0; i < size(); ++i) {
    double p = 1.0;
    for (int j = 0; j < d_; ++j)
      p *= marginals[static_cast<std::size_t>(j)].at(support_[i][static_cast<std::size_t>(j)]);
    if (std::fabs(p - prob_[i]) > 1e-12)
      return false;
  }
  return true;
}

MarginalIndex::MarginalIndex(const FiniteSupportDistribution& dist, Pattern pattern)
  : dist_(&dist)
  , pattern_(std::move(pattern))
{
  for (int v : pattern_)
    if (v < 0 || v >= dist.dimension())
      throw ValidationError("pattern index out of range for distribution");
  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  std::vector<double> x_s;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    project(dist.point(i), pattern_, x_s);
    groups[x_s].push_back(i);
  }
  atom_of_.resize(dist.size());
  for (auto& [atom, members] : groups) {
    std::size_t u = atoms_.size();
    std::vector<double> p;
    for (std::size_t i : members) {
      atom_of_[i] = u;
      p.push_back(dist.probability(i));
    }
    atoms_.push_back(atom);
    mass_.push_back(pairwise_sum(p));
    members_.push_back(std::move(members));
  }
}

std::vector<double>
MarginalIndex::conditional_mean(std::span<const double> values) const
{
  if (values.size() != dist_->size())
    throw ValidationError("conditional mean: value count mismatch");
  std::vector<double> out(atoms_.size());
  std::vector<double> terms;
  for (std::size_t u = 0; u < atoms_.size(); ++u) {
    terms.clear();
    for (std::size_t i : members_[u])
      terms.push_back(dist_->probability(i) * values[i]);
    out[u] = pairwise_sum(terms) / mass_[u];
  }
  return out;
}

std::vector<double>
MarginalIndex::conditional_mean_on_support(std::span<const double> values) const
{
  auto per_atom = conditional_mean(values);
  std::vector<double> out(dist_->size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = per_atom[atom_of_[i]];
  return out;
}

std::size_t
MarginalIndex::find(std::span<const double> x_s) const
{
  std::vector<double> key(x_s.begin(), x_s.end());
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), key);
  if (it == atoms_.end() || *it != key)
    throw ValidationError("missing table entry");
  return static_cast<std::size_t>(it - atoms_.begin());
}

double
MarginalTable::lookup(std::span<const double> x_s) const
{
  std::vector<double> key(x_s.begin(), x_s.end());
  auto it = std::lower_bound(atoms.begin(), atoms.end(), key);
  if (it == atoms.end() || *it != key)
    throw ValidationError("missing table entry");
  return values[static_cast<std::size_t>(it - atoms.begin())];
}

MarginalTable
zero_table(const MarginalIndex& index)
{
  return make_table(index, std::vector<double>(index.atoms(), 0.0));
}

MarginalTable
make_table(const MarginalIndex& index, std::vector<double> values)
{
  if (values.size() != index.atoms())
    throw ValidationError("table size does not match the atoms");
  MarginalTable t;
  t.pattern = index.pattern();
  for (std::size_t u = 0; u < index.atoms(); ++u)
    t.atoms.push_back(index.atom(u));
  t.values = std::move(values);
  return t;
}

} // namespace fusemean
