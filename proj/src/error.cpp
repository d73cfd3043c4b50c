#include "artinsight/error.hpp"

namespace artinsight {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::category_out_of_range:
      return "category_out_of_range";
    case ErrorCode::negative_misc:
      return "negative_misc";
    case ErrorCode::total_mismatch:
      return "total_mismatch";
    case ErrorCode::invalid_value:
      return "invalid_value";
    case ErrorCode::timeout_exhausted:
      return "timeout_exhausted";
    case ErrorCode::auth_error:
      return "auth_error";
    case ErrorCode::provider_error:
      return "provider_error";
    case ErrorCode::payload_too_large:
      return "payload_too_large";
    case ErrorCode::duplicate_provider:
      return "duplicate_provider";
    case ErrorCode::parse_error:
      return "parse_error";
    case ErrorCode::bad_image:
      return "bad_image";
    case ErrorCode::image_too_large:
      return "image_too_large";
    case ErrorCode::unsupported_format:
      return "unsupported_format";
    case ErrorCode::empty_transcript:
      return "empty_transcript";
    case ErrorCode::service_error:
      return "service_error";
    case ErrorCode::no_exemplars:
      return "no_exemplars";
    case ErrorCode::scorecard_parse_error:
      return "scorecard_parse_error";
    case ErrorCode::empty_note:
      return "empty_note";
    case ErrorCode::empty_description:
      return "empty_description";
    case ErrorCode::manifest_error:
      return "manifest_error";
    case ErrorCode::empty_model_column:
      return "empty_model_column";
    case ErrorCode::run_failed:
      return "run_failed";
    case ErrorCode::too_large:
      return "too_large";
    case ErrorCode::not_found:
      return "not_found";
    case ErrorCode::conflict:
      return "conflict";
    case ErrorCode::io_error:
      return "io_error";
    case ErrorCode::invalid_state:
      return "invalid_state";
  }
  return "unknown";
}

}  // namespace artinsight
