#pragma once

#include <stdexcept>
#include <string>

namespace kss {

// Base class for every error raised by the library. The CLI maps
// PreconditionError to exit code 2; everything else is a hard failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InvalidIndexError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateAngleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RefinementError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SymmetryViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BudgetError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace kss
