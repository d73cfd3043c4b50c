#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace artinsight {

enum class ErrorCode {
  // domain-model
  category_out_of_range,
  negative_misc,
  total_mismatch,
  invalid_value,
  // llm-gateway
  timeout_exhausted,
  auth_error,
  provider_error,
  payload_too_large,
  duplicate_provider,
  // description-engine
  parse_error,
  bad_image,
  image_too_large,
  // transcription
  unsupported_format,
  empty_transcript,
  service_error,
  // rubric-scorer
  no_exemplars,
  scorecard_parse_error,
  empty_note,
  empty_description,
  // eval-harness
  manifest_error,
  empty_model_column,
  run_failed,
  // session-store
  too_large,
  not_found,
  conflict,
  io_error,
  invalid_state,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-readable code and,
/// where it applies, the path of the offending field.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(std::move(message)),
        field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  // what() without the leading "<code>: ".
  const std::string& message() const noexcept { return message_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string field_;
};

}  // namespace artinsight
