#pragma once

#include <stdexcept>

namespace asc {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed container or stream (WAV, CSV, manifest, model file).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Recognized container with an encoding we do not handle.
class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Container declares more payload than the stream provides.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Tensor or layer shape mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent model or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace asc
