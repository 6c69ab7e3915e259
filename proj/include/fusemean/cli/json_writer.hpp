#pragma once

#include <json.hpp>

#include <string>

namespace fusemean::cli {

using Json = nlohmann::ordered_json;

//! Serializes with two-space indentation, keys in insertion order and
//! doubles printed with 17 significant digits (non-finite values as null),
//! so equal inputs give byte-identical text.
std::string write_json(const Json& value);

} // namespace fusemean::cli
