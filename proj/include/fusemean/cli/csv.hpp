#pragma once

#include "fusemean/core_model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace fusemean::cli {

//! Parses comma-separated rows with the case-sensitive token NA for missing
//! entries. Rows without NA form the complete block; every other row goes
//! to the block of its observed subset. Blank lines are skipped.
FusedDataset parse_csv(std::string_view text, bool header = false);

//! Reads and parses a file; throws ValidationError when it cannot be read.
FusedDataset ingest_csv(const std::string& path, bool header = false);

//! Number of data columns of a parsed dataset.
int csv_dimension(const FusedDataset& data);

//! Throws ValidationError listing blocks whose pattern is not in `patterns`.
void check_patterns(const FusedDataset& data, const PatternSet& patterns);

} // namespace fusemean::cli
