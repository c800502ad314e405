#pragma once

#include <stdexcept>
#include <string>

namespace mmdufs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be inverted is singular or too ill-conditioned.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (non-finite values and the like).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A graph has a node with nonpositive degree.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// A CSV or truth file could not be parsed.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmdufs
