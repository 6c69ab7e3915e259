#include "fusemean/core_model.hpp"

#include "fusemean/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fusemean {

std::string
format_pattern(const Pattern& s)
{
  std::string out = "{";
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k > 0)
      out += ",";
    out += std::to_string(s[k] + 1);
  }
  return out + "}";
}

void
project(std::span<const double> x, const Pattern& s, std::vector<double>& out)
{
  out.resize(s.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    out[k] = x[static_cast<std::size_t>(s[k])];
}

PatternSet::PatternSet(int d, std::vector<Pattern> patterns)
  : d_(d)
  , patterns_(std::move(patterns))
{
  if (d_ < 2)
    throw ValidationError("dimension must be at least 2");
  if (patterns_.empty())
    throw ValidationError("pattern set is empty");
  std::set<Pattern> seen;
  for (auto& s : patterns_) {
    std::sort(s.begin(), s.end());
    if (s.empty())
      throw ValidationError("empty pattern");
    if (std::adjacent_find(s.begin(), s.end()) != s.end())
      throw ValidationError("repeated index in pattern " + format_pattern(s));
    if (s.front() < 0 || s.back() >= d_)
      throw ValidationError("pattern index out of range in " + format_pattern(s));
    if (static_cast<int>(s.size()) == d_)
      throw ValidationError("pattern equal to the full variable set");
    if (!seen.insert(s).second)
      throw ValidationError("duplicate pattern " + format_pattern(s));
  }
}

std::optional<std::size_t>
PatternSet::index_of(const Pattern& s) const
{
  for (std::size_t k = 0; k < patterns_.size(); ++k)
    if (patterns_[k] == s)
      return k;
  return std::nullopt;
}

std::size_t
FusedDataset::n_pattern(const Pattern& s) const
{
  auto it = incomplete.find(s);
  return it == incomplete.end() ? 0 : it->second.rows();
}

double
FusedDataset::lambda(const Pattern& s) const
{
  if (n() == 0)
    throw ValidationError("empty complete block");
  return static_cast<double>(n_pattern(s)) / static_cast<double>(n());
}

ShiftSpec
ShiftSpec::shifted(std::map<Pattern, ShiftFunction> shifts)
{
  ShiftSpec spec;
  spec.mode_ = ShiftMode::SHIFTED;
  spec.shifts_ = std::move(shifts);
  return spec;
}

bool
ShiftSpec::has_shift(const Pattern& s) const
{
  return mode_ == ShiftMode::SHIFTED && shifts_.count(s) > 0;
}

double
ShiftSpec::evaluate(const Pattern& s, std::span<const double> x_s) const
{
  if (mode_ == ShiftMode::MCAR)
    return 1.0;
  auto it = shifts_.find(s);
  if (it == shifts_.end())
    return 1.0;
  return it->second(x_s);
}

double
ShiftSpec::evaluate_full(const Pattern& s, std::span<const double> x) const
{
  if (!has_shift(s))
    return 1.0;
  thread_local std::vector<double> buf;
  project(x, s, buf);
  return evaluate(s, buf);
}

EstimatorConfig
default_config(std::size_t n, int d, std::size_t pattern_count)
{
  if (n < 2)
    throw ValidationError("default configuration needs n >= 2");
  if (d < 1 || pattern_count == 0)
    throw ValidationError("default configuration needs d >= 1 and a pattern");
  EstimatorConfig cfg;
  double nd = static_cast<double>(n);
  cfg.h = std::min(1.0, std::pow(nd, -1.0 / (4.0 * d)));
  cfg.T = 1.0 / cfg.h;
  cfg.M = static_cast<int>(std::ceil(std::sqrt(std::log(nd))));
  cfg.eta = 1.0 / static_cast<double>(pattern_count);
  return cfg;
}

EstimatorConfig
default_config(const FusedDataset& data, const PatternSet& patterns)
{
  return default_config(data.n(), patterns.dimension(), patterns.size());
}

namespace {

bool
all_finite(const Matrix& m)
{
  return std::all_of(m.data().begin(), m.data().end(),
                     [](double v) { return std::isfinite(v); });
}

} // namespace

std::vector<std::string>
validate(const FusedDataset& data,
         const PatternSet& patterns,
         const ShiftSpec& shifts)
{
  std::vector<std::string> out;
  auto d = static_cast<std::size_t>(patterns.dimension());
  if (data.complete.rows() == 0)
    out.emplace_back("empty complete block");
  else if (data.complete.cols() != d)
    out.emplace_back("complete block width mismatch");
  if (!all_finite(data.complete))
    out.emplace_back("non-finite entry in complete block");

  for (const auto& [s, block] : data.incomplete) {
    std::string name = format_pattern(s);
    if (!patterns.index_of(s)) {
      out.emplace_back("block " + name + " has no pattern");
      continue;
    }
    if (block.cols() != s.size()) {
      out.emplace_back("block width mismatch for " + name);
      continue;
    }
    if (block.rows() == 0)
      out.emplace_back("empty block " + name);
    if (!all_finite(block)) {
      out.emplace_back("non-finite entry in block " + name);
      continue;
    }
    for (std::size_t i = 0; i < block.rows(); ++i) {
      double r;
      try {
        r = shifts.evaluate(s, block.row(i));
      } catch (const std::exception& e) {
        out.emplace_back("shift evaluation failed for " + name + ": " + e.what());
        break;
      }
      if (!std::isfinite(r) || r <= 0.0) {
        out.emplace_back("nonpositive shift for " + name + " at row " +
                         std::to_string(i + 1));
        break;
      }
    }
  }
  for (const auto& s : patterns.patterns())
    if (!data.incomplete.count(s))
      out.emplace_back("missing block for " + format_pattern(s));
  return out;
}

void
require_valid(const FusedDataset& data,
              const PatternSet& patterns,
              const ShiftSpec& shifts)
{
  auto report = validate(data, patterns, shifts);
  if (!report.empty())
    throw ValidationError(report.front());
}

} // namespace fusemean
