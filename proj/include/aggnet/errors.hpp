#pragma once

#include <stdexcept>
#include <string>

namespace aggnet {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape/dimension violations (mismatched operands, zero dims, wrong rank).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad model/training configuration (unknown preset, kernel longer than sequence cap...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input that names where it went wrong (line/row numbers in the message).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input with invalid content (unknown label, empty corpus...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Filesystem problems: missing files, failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (NaN loss aborts training).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Command-line misuse; the CLI maps this to exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Saved-bundle integrity failures, kept distinct so callers can tell them apart.
class HashMismatchError : public Error {
 public:
  using Error::Error;
};

class TruncatedBlobError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace aggnet
