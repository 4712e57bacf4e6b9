#pragma once

#include <stdexcept>
#include <string>

namespace rwre {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid law, malformed input or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A site outside the realized window was requested and the environment
/// cannot (or may not) be extended.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// A budget ran out: scan caps, rejection restarts, truncation guards.
/// Usually a sign that the law is recurrent or too close to it.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

}  // namespace rwre
