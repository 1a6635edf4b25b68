#pragma once

#include <stdexcept>
#include <string>

namespace smad {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter or contract violation by the caller (CLI exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be used: malformed files, undecodable images,
/// unresolvable datasets (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace smad
