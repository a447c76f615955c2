#pragma once

#include <stdexcept>
#include <string>

namespace fairhgr {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, shape or configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairhgr
