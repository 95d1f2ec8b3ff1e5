#pragma once

#include <stdexcept>
#include <string>

namespace ntlc {

/// Base class for all library errors so callers can catch everything at once.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (CSV/JSON syntax, bad header, unparseable field).
struct ParseError : Error {
  using Error::Error;
};

/// Structurally valid input that violates a domain invariant.
struct ValidationError : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

/// Tensor or series shape mismatch between producer and consumer.
struct ShapeError : Error {
  using Error::Error;
};

/// Not enough data to perform the requested computation.
struct InsufficientDataError : Error {
  using Error::Error;
};

/// Bad or contradictory run configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Forecast members that should share a time axis do not.
struct AlignmentError : Error {
  using Error::Error;
};

/// Filesystem failure while reading or atomically writing artifacts.
struct IoError : Error {
  using Error::Error;
};

}  // namespace ntlc
