#pragma once

#include <string>

#include "artinsight/gateway.hpp"

namespace artinsight {

/// Deterministic offline responder for the "mock" provider kind. Answers
/// description requests with a well-formed analysis derived from the request
/// hash (integrating the artist's words when a transcript is present) and
/// judge requests with a full-marks scorecard.
MockProvider::Responder synthetic_responder();

/// True when the request's system prompt is a rubric-judge prompt.
bool is_judge_request(const ProviderRequest& request);

}  // namespace artinsight
