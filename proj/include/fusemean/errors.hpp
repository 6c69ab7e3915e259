#pragma once

#include <stdexcept>
#include <string>

namespace fusemean {

//! Input does not satisfy a documented precondition (bad data, bad config).
class ValidationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! A computation could not be completed (degenerate density, singular
//! system, arithmetic failure inside a user expression).
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace fusemean
