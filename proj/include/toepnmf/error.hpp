#pragma once

#include <stdexcept>
#include <string>

namespace toepnmf {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent shapes or out-of-range arguments supplied by the caller.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed, missing or non-finite input data (files, matrices, signals).
class DataError : public Error {
 public:
  using Error::Error;
};

// A solve or iteration could not produce a usable result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace toepnmf
