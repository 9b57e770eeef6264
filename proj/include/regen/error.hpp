#pragma once

#include <stdexcept>
#include <string>

namespace regen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model definition (rates, irreducibility, sizes).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure that valid inputs should never trigger.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A minorization certificate (or quantity derived from it) is violated.
class CertificateError : public Error {
 public:
  using Error::Error;
};

/// Not enough data for a statistical estimate.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace regen
