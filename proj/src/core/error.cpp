#include "memrw/error.hpp"

namespace memrw {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kFormat: return "format_error";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kMismatch: return "mismatch";
    case ErrorCode::kInternal: return "internal_error";
  }
  return "unknown";
}

}  // namespace memrw
