#pragma once

#include "fusemean/cli/config.hpp"
#include "fusemean/cli/json_writer.hpp"
#include "fusemean/simulation.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fusemean::cli {

inline constexpr const char* kVersion = "0.1.0";

Json cmd_estimate(const RunConfig& c);
Json cmd_ustat(const RunConfig& c);
Json cmd_oracle(const RunConfig& c);
Json cmd_simulate(const RunConfig& c);

//! Report for `oracle gaussian --rho r --lambda l1 l2`.
Json gaussian_oracle_report(double rho, double lambda1, double lambda2);

Json summary_json(const MonteCarloSummary& s);

//! Full command line: parses arguments, runs the subcommand, writes the
//! report to `out` (or the --out file) and errors as JSON to `err`.
//! Returns 0, 1 for validation failures or 2 for numerical failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fusemean::cli
