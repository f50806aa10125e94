#pragma once

#include <stdexcept>
#include <string>

namespace vibdiag {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameters (bad k, bad window length, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or degenerate data (parse failures, non-finite samples, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace vibdiag
