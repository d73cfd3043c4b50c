#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "artinsight/blob_source.hpp"
#include "artinsight/domain.hpp"
#include "artinsight/gateway.hpp"
#include "artinsight/prompts.hpp"

namespace artinsight {

struct EngineConfig {
  std::string default_model_id = "openai/gpt-4o";
  std::size_t image_size_limit = 10 * 1024 * 1024;
  int max_output_tokens = 2048;
  double temperature = 1.0;
  std::int64_t timeout_ms = kDefaultTimeout.count();
};

inline constexpr std::string_view kDescribeInstruction =
    "Describe this artwork following the instructions.";

/// Parses the model's JSON answer. Tolerates surrounding code fences or prose
/// around a single JSON object; trims every string. Throws Error(parse_error)
/// with the failing field path. model_id and prompt_revision are left empty.
AnalysisResult parse_analysis(std::string_view raw_text, Timestamp generated_at = now_ms());

/// Extracts the outermost JSON object from model output, if any.
std::optional<Json> extract_json_object(std::string_view raw_text);

/// Checks the blob is a PNG or JPEG within `limit` bytes and returns it as a
/// request image. Throws Error(image_too_large | bad_image).
ImagePayload load_image_payload(const BlobReader& blobs, const BlobRef& ref, std::size_t limit);

class DescriptionEngine {
 public:
  DescriptionEngine(Gateway& gateway, const BlobReader& blobs,
                    PromptBundle bundle = PromptBundle::canonical(), EngineConfig config = {});

  /// One gateway call (plus at most one repair call when the answer breaks
  /// the output schema).
  AnalysisResult analyze_artwork(const BlobRef& image_ref,
                                 std::optional<std::string> model_id = std::nullopt,
                                 std::optional<std::string> transcript = std::nullopt) const;

  /// Fills a pending session with its initial revision.
  ArtworkSession describe_session(const ArtworkSession& pending,
                                  std::optional<std::string> model_id = std::nullopt) const;

  /// Returns a new session with one transcript_reprompt revision appended.
  /// `session` itself is never modified; on failure nothing is returned.
  ArtworkSession reprompt_with_transcript(const ArtworkSession& session,
                                          const std::string& transcript,
                                          std::optional<std::string> model_id = std::nullopt) const;

  ProviderRequest build_request(const ImagePayload& image, const std::string& model_id,
                                std::optional<std::string_view> transcript) const;

  const PromptBundle& bundle() const noexcept { return bundle_; }
  const EngineConfig& config() const noexcept { return config_; }

 private:
  Gateway& gateway_;
  const BlobReader& blobs_;
  PromptBundle bundle_;
  EngineConfig config_;
};

}  // namespace artinsight
