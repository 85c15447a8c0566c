#pragma once

#include <stdexcept>
#include <string>

namespace svlab {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (wrong layout, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes are incompatible for the requested operation.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// An argument lies outside the mathematical domain (e.g. log of 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or hit a degenerate value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Numerical integration blew up.
class InstabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Training diverged (non-finite loss or gradient).
class TrainingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnsupportedSystemError : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace svlab
