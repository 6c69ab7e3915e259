#pragma once

#include "fusemean/cli/json_writer.hpp"
#include "fusemean/core_model.hpp"
#include "fusemean/finite_support.hpp"
#include "fusemean/simulation.hpp"
#include "fusemean/ustat.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fusemean::cli {

struct DataSource
{
  std::string path; //!< resolved against the config file's directory
  bool header = false;
};

//! Fields of EstimatorConfig given in the config; unset ones keep defaults.
struct EstimatorOverrides
{
  std::optional<int> M;
  std::optional<double> eta;
  std::optional<double> h;
  std::optional<double> T;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> ustat_budget;
  std::optional<std::uint64_t> max_chains;
};

EstimatorConfig apply(const EstimatorOverrides& o, EstimatorConfig base);

struct OracleSpec
{
  //! gaussian | exact | gradient_descent | chains | product | monotone_mcar |
  //! monotone_shifted
  std::string kind;
  double rho = 0.0;
  std::vector<double> lambda; //!< may hold +inf for gaussian
  std::optional<FiniteSupportDistribution> distribution;
  int M = 0;
  double eta = 1.0;
  std::uint64_t max_chains = 100000;
};

struct ScenarioSpec
{
  Generator generator = Generator::BIVARIATE_GAUSSIAN;
  double rho = 0.0;
  std::optional<FiniteSupportDistribution> distribution;
  std::vector<double> lambda;
  std::size_t n = 0;
  std::size_t replications = 2;
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::CROSSFIT;
};

struct RunConfig
{
  Json raw;
  std::optional<DataSource> data;
  std::optional<int> d;
  std::optional<std::vector<Pattern>> patterns; //!< 0-based
  std::optional<std::string> a;
  std::optional<double> declared_bound;
  std::map<Pattern, std::string> shifts;
  EstimatorOverrides estimator;
  UStatConfig ustat;
  double alpha = 0.05;
  std::optional<std::string> output;
  std::optional<std::size_t> threads;
  std::optional<OracleSpec> oracle;
  std::optional<ScenarioSpec> scenario;
};

//! Validates types and rejects unknown keys at every level.
RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {});

//! Reads a JSON config file.
RunConfig load_config(const std::string& path);

//! Parses "{1,2}" or "1,2" (1-based) into a 0-based pattern.
Pattern parse_pattern_key(const std::string& key);

//! Pattern set for dimension d; throws when the config has none.
PatternSet make_patterns(const RunConfig& c, int d);

//! Functional from the "a" expression.
Functional make_functional(const RunConfig& c, int d);

//! MCAR when no shifts are given; otherwise one restricted expression per
//! listed pattern, evaluated on local coordinates.
ShiftSpec make_shifts(const RunConfig& c, const PatternSet& patterns);

FiniteSupportDistribution parse_distribution(const Json& j, const std::string& where);

Json to_json(const EstimatorConfig& c);
Json to_json(const UStatConfig& c);
Json patterns_json(const PatternSet& p);

} // namespace fusemean::cli
