#pragma once

#include <stdexcept>
#include <string>

namespace omnisynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, out of range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numeric computation produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

#define OMNISYNTH_REQUIRE(cond, msg)                     \
  do {                                                   \
    if (!(cond)) throw ::omnisynth::InvalidArgument(msg); \
  } while (0)

}  // namespace omnisynth
