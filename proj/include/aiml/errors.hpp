#pragma once

#include <stdexcept>
#include <string>

namespace aiml {

// Malformed input files (network or dataset) and data that does not bind to
// the network it is used with.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures: zero-probability evidence, exhausted enumeration budgets.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroSupportError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BudgetExceeded : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace aiml
