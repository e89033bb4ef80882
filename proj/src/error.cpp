#include "frustum/error.hpp"

namespace frustum {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FrameMismatch: return "frame_mismatch";
    case ErrorCode::DegenerateMotion: return "degenerate_motion";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::ParallelRays: return "parallel_rays";
    case ErrorCode::CoplanarViews: return "coplanar_views";
    case ErrorCode::NearPlaneOutOfRange: return "near_plane_out_of_range";
    case ErrorCode::BehindSource: return "behind_source";
    case ErrorCode::CollinearLandmarks: return "collinear_landmarks";
    case ErrorCode::DegenerateProjection: return "degenerate_projection";
    case ErrorCode::NoCrossing: return "no_crossing";
    case ErrorCode::InvalidParams: return "invalid_params";
    case ErrorCode::SchemaMismatch: return "schema_mismatch";
    case ErrorCode::CorruptLog: return "corrupt_log";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::BadRequest: return "bad_request";
  }
  return "bad_request";
}

std::string_view api_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FrameMismatch: return "frame_mismatch";
    case ErrorCode::DegenerateMotion: return "degenerate_motion";
    // too few pose pairs is a degenerate calibration input
    case ErrorCode::InsufficientData: return "degenerate_motion";
    case ErrorCode::ParallelRays: return "parallel_rays";
    case ErrorCode::CoplanarViews: return "coplanar_views";
    case ErrorCode::NearPlaneOutOfRange: return "near_plane_out_of_range";
    case ErrorCode::SchemaMismatch: return "schema_mismatch";
    case ErrorCode::CorruptLog: return "schema_mismatch";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::BehindSource:
    case ErrorCode::CollinearLandmarks:
    case ErrorCode::DegenerateProjection:
    case ErrorCode::NoCrossing:
    case ErrorCode::InvalidParams:
    case ErrorCode::BadRequest: return "bad_request";
  }
  return "bad_request";
}

}  // namespace frustum
