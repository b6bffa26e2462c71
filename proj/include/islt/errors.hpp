#pragma once

#include <stdexcept>
#include <string>

namespace islt {

// Bad input or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Non-convergence, cost caps, empty ensembles. The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptyEnsembleError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace islt
