#pragma once

#include <stdexcept>
#include <string>

namespace memrw {

// Stable error categories. The numeric values are part of the C API.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kConfig = 2,
  kIo = 3,
  kFormat = 4,
  kDivergence = 5,
  kMismatch = 6,
  kInternal = 7,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace memrw
