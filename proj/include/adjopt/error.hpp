#pragma once

#include <stdexcept>
#include <string>

namespace adjopt {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Misuse of the recording API (nested sessions, foreign scalars, ...).
class RecordingError : public Error {
public:
  using Error::Error;
};

/// A recorded elementary operation was evaluated outside its domain.
class NumericalError : public Error {
public:
  using Error::Error;
};

inline void require_size(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected size " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace adjopt
