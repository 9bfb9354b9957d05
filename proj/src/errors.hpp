#pragma once

#include <stdexcept>
#include <string>

namespace decoupler {

/// Error categories; mapped one-to-one onto the C API status codes.
enum class ErrorKind {
  InvalidArgument = 1,
  NotPsd = 2,
  Numerical = 3,
  Horizon = 4,
  Config = 5,
  Io = 6,
  NotConverged = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace decoupler
