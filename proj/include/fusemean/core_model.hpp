#pragma once

#include "fusemean/matrix.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fusemean {

//! A pattern S: sorted, 0-based variable indices.
using Pattern = std::vector<int>;

//! "{1,2}" style, 1-based.
std::string format_pattern(const Pattern& s);

//! Copies the coordinates of `x` listed in `s` into `out` (resized).
void project(std::span<const double> x, const Pattern& s, std::vector<double>& out);

//! The collection of observed subsets together with the dimension d.
class PatternSet
{
public:
  //! Throws ValidationError unless d >= 2 and every pattern is a distinct,
  //! nonempty, proper subset of {0,...,d-1}. Patterns are sorted internally;
  //! list order is preserved.
  PatternSet(int d, std::vector<Pattern> patterns);

  int dimension() const { return d_; }
  std::size_t size() const { return patterns_.size(); }
  const std::vector<Pattern>& patterns() const { return patterns_; }
  const Pattern& operator[](std::size_t k) const { return patterns_[k]; }

  //! Position of `s` in the list, or nullopt.
  std::optional<std::size_t> index_of(const Pattern& s) const;

private:
  int d_;
  std::vector<Pattern> patterns_;
};

//! Complete n x d block plus one n_S x |S| block per observed pattern.
//! Construction does not check consistency; see validate().
struct FusedDataset
{
  Matrix complete;
  std::map<Pattern, Matrix> incomplete;

  std::size_t n() const { return complete.rows(); }
  std::size_t n_pattern(const Pattern& s) const;
  //! lambda_S = n_S / n.
  double lambda(const Pattern& s) const;
};

//! Shift functions take x_S in local coordinates (length |S|).
using ShiftFunction = std::function<double(std::span<const double>)>;

enum class ShiftMode
{
  MCAR,
  SHIFTED
};

class ShiftSpec
{
public:
  ShiftSpec() = default;

  static ShiftSpec mcar() { return {}; }
  //! Patterns without an entry use r_S = 1.
  static ShiftSpec shifted(std::map<Pattern, ShiftFunction> shifts);

  ShiftMode mode() const { return mode_; }
  bool has_shift(const Pattern& s) const;

  //! r_S(x_S); exactly 1 in MCAR mode.
  double evaluate(const Pattern& s, std::span<const double> x_s) const;

  //! r_S evaluated at the S-coordinates of a full row.
  double evaluate_full(const Pattern& s, std::span<const double> x) const;

private:
  ShiftMode mode_ = ShiftMode::MCAR;
  std::map<Pattern, ShiftFunction> shifts_;
};

//! The function a whose mean is estimated.
struct Functional
{
  std::function<double(std::span<const double>)> a;
  //! Advisory sup-norm hint; never used to clip.
  std::optional<double> declared_bound;
  //! Expression source when the functional came from the expression language.
  std::string source;

  double operator()(std::span<const double> x) const { return a(x); }
};

struct EstimatorConfig
{
  int M = 0;
  double eta = 1.0;
  double h = 1.0;
  double T = 1.0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> ustat_budget;
  //! Bound on explicitly enumerated chains per terminal pattern.
  std::uint64_t max_chains = 100000;
};

//! h = 1/T = n^{-1/(4d)}, M = ceil(sqrt(log n)), eta = 1/|S|.
//! Throws ValidationError for n < 2 or an empty pattern count.
EstimatorConfig default_config(std::size_t n, int d, std::size_t pattern_count);
EstimatorConfig default_config(const FusedDataset& data, const PatternSet& patterns);

//! Violations of the data model, empty when valid. Checks that every block
//! belongs to a listed pattern and has |S| columns, that all entries are
//! finite, that complete rows have d columns and that shifts are positive and
//! finite on every incomplete row.
std::vector<std::string> validate(const FusedDataset& data,
                                  const PatternSet& patterns,
                                  const ShiftSpec& shifts);

//! Throws ValidationError carrying the first violation, if any.
void require_valid(const FusedDataset& data,
                   const PatternSet& patterns,
                   const ShiftSpec& shifts);

} // namespace fusemean
