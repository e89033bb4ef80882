#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace frustum {

// Every failure raised by the core library carries one of these codes.
enum class ErrorCode {
  FrameMismatch,
  DegenerateMotion,
  InsufficientData,
  ParallelRays,
  CoplanarViews,
  NearPlaneOutOfRange,
  BehindSource,
  CollinearLandmarks,
  DegenerateProjection,
  NoCrossing,
  InvalidParams,
  SchemaMismatch,
  CorruptLog,
  NotFound,
  BadRequest,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Stable snake_case name of a module error ("degenerate_motion", ...).
std::string_view error_name(ErrorCode code) noexcept;

// Service-level code the error is reported under. Total over ErrorCode.
std::string_view api_code(ErrorCode code) noexcept;

}  // namespace frustum
