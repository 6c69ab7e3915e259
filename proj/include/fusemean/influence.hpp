#pragma once

#include "fusemean/core_model.hpp"
#include "fusemean/kernel.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace fusemean {

//! P(B >= m) for B ~ Bin(M, eta), by summing the probability mass.
//! 1 for m <= 0 and 0 for m > M. B = 0 when M = 0.
double binomial_tail(int M, double eta, int m);

struct BinomialWeights
{
  int M = 0;
  double eta = 1.0;
  std::vector<double> table; //!< b(0..M)

  static BinomialWeights make(int M, double eta);
  double operator()(int m) const;
};

//! Number of chains of length m over k patterns with no repeated neighbour.
std::uint64_t chain_count(std::size_t k, int m);

//! Row assignment for cross-fitting. Row indices refer to the complete block.
struct FoldPlan
{
  std::size_t n = 0;
  int M = 0;
  std::uint64_t seed = 0;
  std::array<std::vector<std::size_t>, 2> halves;
  //! pieces[l][m] are the rows of piece m+1 of half l+1.
  std::array<std::vector<std::vector<std::size_t>>, 2> pieces;
};

//! Seeded shuffle, then halves of sizes ceil(n/2) and floor(n/2), each cut
//! into M contiguous pieces whose sizes differ by at most one (earlier
//! pieces take the remainder). Requires n >= 2M and n >= 2.
FoldPlan make_fold_plan(std::size_t n, int M, std::uint64_t seed);

//! Complete-data rows of one piece, preprocessed for every pattern.
struct PieceData
{
  Matrix rows;
  std::vector<Matrix> projected;            //!< per pattern, |S| columns
  std::vector<char> in_ball;                //!< ||y||_inf <= T
  std::vector<double> r_hat;                //!< per pattern, piece mean of r_S
  std::vector<std::vector<double>> weight;  //!< per pattern, w_S(y)
  std::vector<double> weight_total;         //!< per pattern, sum of w_S
};

//! The fitted map g -> T_S^{(m)}(g): shift-weighted kernel regression on one
//! piece, centred by the weighted piece mean, zero outside the truncation
//! ball. Evaluates in S-local coordinates.
class PieceRegression
{
public:
  PieceRegression(std::shared_ptr<const PieceData> piece,
                  std::size_t pattern_index,
                  const Pattern& pattern,
                  double lambda,
                  std::shared_ptr<const ShiftSpec> shifts,
                  double h,
                  double T,
                  std::span<const double> g);

  double operator()(std::span<const double> x_s) const;

  double correction() const { return correction_; }

private:
  std::shared_ptr<const PieceData> piece_;
  std::size_t s_;
  Pattern pattern_;
  double lambda_;
  std::shared_ptr<const ShiftSpec> shifts_;
  MarginalKernel kernel_;
  double T_;
  std::vector<double> responses_;
  double correction_;
};

//! Fitted alpha_S for one half: sum over depth m of coefficient times a
//! piece regression; zero outside the truncation ball.
class AlphaHat
{
public:
  AlphaHat() = default;
  AlphaHat(Pattern pattern, double T)
    : pattern_(std::move(pattern))
    , T_(T)
  {
  }

  void add_term(double coefficient, PieceRegression term);

  const Pattern& pattern() const { return pattern_; }
  std::size_t terms() const { return terms_.size(); }

  //! Evaluates at S-local coordinates.
  double operator()(std::span<const double> x_s) const;

  //! Evaluates at the S coordinates of each full row.
  std::vector<double> evaluate_full_rows(const Matrix& rows) const;

  //! Evaluates at every row of an S-local matrix.
  std::vector<double> evaluate_local_rows(const Matrix& rows_s) const;

private:
  Pattern pattern_;
  double T_ = 1.0;
  std::vector<std::pair<double, PieceRegression>> terms_;
};

//! Shared, preprocessed state for one half of the complete data.
class HalfContext
{
public:
  HalfContext(const FusedDataset& data,
              const PatternSet& patterns,
              const ShiftSpec& shifts,
              const FoldPlan& plan,
              int half,
              const EstimatorConfig& config);

  const PatternSet& patterns() const { return patterns_; }
  int depth() const { return static_cast<int>(pieces_.size()); }
  const PieceData& piece(int m) const { return *pieces_[static_cast<std::size_t>(m)]; }

  //! T_S^{(m)} applied to responses g over the rows of piece m (0-based m).
  PieceRegression regression(int m, std::size_t s, std::span<const double> g) const;

  double T() const { return T_; }

private:
  PatternSet patterns_;
  std::shared_ptr<const ShiftSpec> shifts_;
  std::vector<double> lambda_;
  double h_;
  double T_;
  std::vector<std::shared_ptr<const PieceData>> pieces_;
};

//! alpha_hat_{S,(l)} for every pattern (in pattern order), built by the
//! aggregated recursion U^{(1)}_S = T^{(1)}_S(a),
//! U^{(m)}_S = T^{(m)}_S(sum_{S' != S} U^{(m-1)}_{S'}). Because each T_S is
//! linear, U^{(m)}_S equals the sum over chains of length m ending in S of
//! the chain estimates, so the result matches explicit enumeration.
//! `half` is 0 or 1.
std::vector<AlphaHat> assemble_alpha(const FusedDataset& data,
                                     const PatternSet& patterns,
                                     const ShiftSpec& shifts,
                                     const Functional& functional,
                                     const FoldPlan& plan,
                                     int half,
                                     const EstimatorConfig& config);

//! A single chain estimate a_hat^{(m)}_chain; pattern indices refer to the
//! pattern set.
struct ChainEstimate
{
  std::vector<std::size_t> chain;
  std::shared_ptr<const PieceRegression> fit;

  double operator()(std::span<const double> x_s) const { return (*fit)(x_s); }
};

//! Fits one chain from scratch by the recursion on pieces 1..|chain|.
ChainEstimate fit_chain(const FusedDataset& data,
                        const PatternSet& patterns,
                        const ShiftSpec& shifts,
                        const Functional& functional,
                        const FoldPlan& plan,
                        int half,
                        const std::vector<std::size_t>& chain,
                        const EstimatorConfig& config);

//! Same map as assemble_alpha, built by enumerating every chain depth first
//! and memoizing prefixes. Throws ValidationError when
//! |S| (|S|-1)^{M-1} exceeds config.max_chains.
std::vector<AlphaHat> assemble_alpha_chains(const FusedDataset& data,
                                            const PatternSet& patterns,
                                            const ShiftSpec& shifts,
                                            const Functional& functional,
                                            const FoldPlan& plan,
                                            int half,
                                            const EstimatorConfig& config);

} // namespace fusemean
