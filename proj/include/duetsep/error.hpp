#pragma once

#include <stdexcept>
#include <string>

namespace duetsep {

/// Runtime failure inside the library (bad file, singular system, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller; the CLI maps it to exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

[[noreturn]] void fail(const std::string& what);
[[noreturn]] void fail_argument(const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) fail_argument(what);
}

}  // namespace duetsep
