#pragma once

#include <stdexcept>
#include <string>

namespace srdet {

enum class ErrorCode {
  invalid_argument,  // bad inputs, config validation, contract violations
  io,                // filesystem failures
  format,            // unparsable or version-mismatched files
  runtime            // everything else (NaN losses, infeasible placement, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail_invalid(const std::string& msg) {
  throw Error(ErrorCode::invalid_argument, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) { throw Error(ErrorCode::io, msg); }
[[noreturn]] inline void fail_format(const std::string& msg) { throw Error(ErrorCode::format, msg); }
[[noreturn]] inline void fail_runtime(const std::string& msg) { throw Error(ErrorCode::runtime, msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail_invalid(msg);
}

}  // namespace srdet
