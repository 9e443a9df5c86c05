#pragma once

#include <stdexcept>
#include <string>

namespace binori {

enum class ErrorCode {
  invalid_input = 1,
  invalid_geometry = 2,
  empty_features = 3,
  io = 4,
  format = 5,
};

// All library failures are reported as binori::Error; the code maps 1:1 onto
// the C API status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace binori
