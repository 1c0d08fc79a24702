#pragma once

#include <stdexcept>
#include <string>

namespace covspec {

/// Bad input: malformed files, out-of-domain arguments, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: rank deficiency, non-PSD matrices, failed factorizations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace covspec
