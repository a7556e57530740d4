#pragma once

#include <stdexcept>
#include <string>

namespace frailtime {

// Malformed or inconsistent input data (CSV content, formula, JSON schema, I/O).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A likelihood or optimizer evaluation produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace frailtime
