#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artinsight/blob_source.hpp"
#include "artinsight/domain.hpp"
#include "artinsight/gateway.hpp"

namespace artinsight {

/// One rubric guideline with the low/high scoring examples that calibrate it.
struct RubricGuideline {
  RubricCategory category;
  std::string_view design_goal;
  std::string_view question;
  std::string_view low_example;
  std::string_view high_example;
};

const std::array<RubricGuideline, 4>& rubric_guidelines();
extern const std::string_view kMiscQuestion;

inline constexpr std::size_t kMaxExemplars = 10;

/// Judge prompt: rubric, scale and subtraction rule, every exemplar once (in
/// order), then the output schema. Throws Error(no_exemplars) for an empty
/// list and Error(invalid_value) above kMaxExemplars or for invalid exemplar
/// scorecards.
std::string build_scorer_prompt(std::span<const ScorerExemplar> exemplars);

/// Hash over the canonical JSON of the exemplars, "sha256:<hex>".
std::string exemplar_hash(std::span<const ScorerExemplar> exemplars);

/// Loads an exemplar bundle manifest: a JSON array (or {"exemplars": [...]})
/// of {image, description, scorecard, rationale} paths relative to the
/// manifest. Throws Error(manifest_error).
std::vector<ScorerExemplar> load_exemplar_bundle(const std::filesystem::path& manifest);

struct ParsedScorecard {
  RubricScorecard card;
  std::vector<std::string> warnings;
};

/// Parses judge output. Category keys may be names or letters A-D; misc may be
/// "misc_subtraction" or "misc". The total is always recomputed locally; a
/// disagreeing reported total is kept in judge_reported_total. Throws
/// Error(scorecard_parse_error).
ParsedScorecard parse_scorecard(std::string_view raw_text, bool require_rationale = true);

/// Corrections map category names (or letters) and "misc_subtraction" to new
/// values. The pre-override scorecard is appended to the audit trail.
RubricScorecard apply_human_override(const RubricScorecard& card,
                                     const std::map<std::string, int>& corrections,
                                     const std::string& note);

struct ScorerConfig {
  std::string judge_model_id = "openai/gpt-4o";
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::int64_t timeout_ms = kDefaultTimeout.count();
  std::size_t image_size_limit = 10 * 1024 * 1024;
};

inline constexpr std::string_view kExemplarModeTextOnly = "text_only";

class RubricScorer {
 public:
  RubricScorer(Gateway& gateway, const BlobReader& blobs, std::vector<ScorerExemplar> exemplars,
               ScorerConfig config = {});

  /// One judge call plus at most one repair call. scored_by is llm.
  RubricScorecard score_description(const BlobRef& image_ref, const std::string& description,
                                    std::optional<std::string> judge_model_id = std::nullopt) const;

  ProviderRequest build_request(const ImagePayload& image, const std::string& description,
                                const std::string& judge_model_id) const;

  const std::string& judge_prompt() const noexcept { return prompt_; }
  const std::string& exemplar_hash() const noexcept { return exemplar_hash_; }
  std::size_t exemplar_count() const noexcept { return exemplars_.size(); }
  const ScorerConfig& config() const noexcept { return config_; }
  /// Requests carry a single image, so exemplars always travel as text.
  std::string_view exemplar_mode() const noexcept { return kExemplarModeTextOnly; }

 private:
  Gateway& gateway_;
  const BlobReader& blobs_;
  std::vector<ScorerExemplar> exemplars_;
  ScorerConfig config_;
  std::string prompt_;
  std::string exemplar_hash_;
};

}  // namespace artinsight
