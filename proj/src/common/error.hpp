#pragma once

#include <stdexcept>
#include <string>

namespace fer {

// Failure categories surfaced across the library. The C API maps each one to
// a distinct status code, the service maps them to HTTP statuses.
enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  io,
  decode,
  bad_magic,
  unsupported_version,
  truncated,
  checksum_mismatch,
  format,
  consent_required,
  not_found,
  no_active_model,
  non_finite,
  internal,
};

const char* to_string(ErrorCode code) noexcept;

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

}  // namespace fer
