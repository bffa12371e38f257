#pragma once

#include <stdexcept>
#include <string>

namespace mgd {

/// Bad input: violated invariant, malformed record, inconsistent shapes.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// File could not be opened, read, written or decoded.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mgd
