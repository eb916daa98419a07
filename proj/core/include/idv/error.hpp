#pragma once

#include <stdexcept>
#include <string>

namespace idv {

/// Base class for every error raised by the library. Carries a message that
/// names the offending argument, dimension, file or line where possible.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller handed in something that violates a precondition (bad shape,
/// out-of-range index, malformed config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Failure while reading or writing a file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bytes on disk do not follow the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A numeric computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace idv
