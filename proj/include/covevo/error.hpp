#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace covevo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at offset " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class MaskLengthError : public Error {
 public:
  using Error::Error;
};

class LimitError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised for numerically unusable kernels/hyperparameters (non-finite values,
/// failed factorization). Callers in the search treat it as worst fitness.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CholeskyFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AllRestartsFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace covevo
