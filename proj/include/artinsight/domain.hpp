#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "artinsight/error.hpp"

namespace artinsight {

using Json = nlohmann::json;
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp now_ms();
/// RFC 3339 in UTC with millisecond precision, e.g. 2026-10-14T09:30:00.250Z.
std::string format_timestamp(Timestamp ts);
Timestamp parse_timestamp(std::string_view text);

/// Content-addressed reference, "sha256:<64 hex digits>".
struct BlobRef {
  std::string value;

  bool empty() const noexcept { return value.empty(); }
  auto operator<=>(const BlobRef&) const = default;
};

struct ValidationIssue {
  ErrorCode code;
  std::string field;
  std::string message;
};

// ---------------------------------------------------------------------------
// Descriptions and analysis results

enum class DescriptionKind { descriptive, creative };

struct Description {
  DescriptionKind kind = DescriptionKind::descriptive;
  std::string text;
  Timestamp generated_at{};

  bool operator==(const Description&) const = default;
};

/// Soft lint: warns about list markers the prompt asks the model to avoid.
/// Never rejects.
std::vector<std::string> lint_description(std::string_view text);

struct AnalysisResult {
  std::string title;
  Description descriptive;
  Description creative;
  std::vector<std::string> questions;
  std::string model_id;
  std::string prompt_revision;

  bool operator==(const AnalysisResult&) const = default;
};

inline constexpr std::size_t kQuestionCount = 3;

std::optional<ValidationIssue> validate_analysis(const AnalysisResult& result);

// ---------------------------------------------------------------------------
// Sessions

struct AudioNote {
  BlobRef audio_ref;
  std::string media_type;
  std::int64_t duration_ms = 0;
  std::string transcript;
  std::string transcriber_id;

  bool operator==(const AudioNote&) const = default;
};

enum class RevisionCause { initial, transcript_reprompt };

struct Revision {
  int number = 0;
  AnalysisResult result;
  RevisionCause cause = RevisionCause::initial;
  std::optional<std::string> transcript;

  bool operator==(const Revision&) const = default;
};

enum class SessionStatus { pending, ready, failed };

struct ArtworkSession {
  std::string session_id;
  Timestamp created_at{};
  BlobRef image_ref;
  std::string image_media_type;
  std::string title;
  std::optional<AnalysisResult> current;
  std::optional<AudioNote> audio;
  std::vector<Revision> revisions;
  SessionStatus status = SessionStatus::pending;
  std::optional<std::string> error;
  // Optimistic-concurrency counter owned by the session store.
  std::int64_t store_version = 0;

  bool operator==(const ArtworkSession&) const = default;
};

std::optional<ValidationIssue> validate_session(const ArtworkSession& session);

/// Returns a copy of `session` with `result` appended as the next revision.
ArtworkSession append_revision(const ArtworkSession& session, AnalysisResult result,
                               RevisionCause cause,
                               std::optional<std::string> transcript = std::nullopt);

// ---------------------------------------------------------------------------
// Rubric

enum class RubricCategory { presumptive, reductive, detail, coverage };

inline constexpr std::array<RubricCategory, 4> kRubricCategories = {
    RubricCategory::presumptive, RubricCategory::reductive, RubricCategory::detail,
    RubricCategory::coverage};

inline constexpr int kCategoryMax = 4;
inline constexpr int kTotalMax = 16;

std::string_view category_name(RubricCategory category) noexcept;
/// The rubric letter (A through D) a category corresponds to.
char category_letter(RubricCategory category) noexcept;
std::optional<RubricCategory> category_from_name(std::string_view name) noexcept;

enum class ScoredBy { llm, human_override };

/// Snapshot of a scorecard taken before a human override was applied.
struct OverrideAudit {
  int presumptive = 0;
  int reductive = 0;
  int detail = 0;
  int coverage = 0;
  int misc_subtraction = 0;
  int total = 0;
  ScoredBy scored_by = ScoredBy::llm;
  std::map<std::string, std::string> rationale;
  std::map<std::string, int> corrections;
  std::string note;

  bool operator==(const OverrideAudit&) const = default;
};

struct RubricScorecard {
  int presumptive = 0;
  int reductive = 0;
  int detail = 0;
  int coverage = 0;
  int misc_subtraction = 0;
  // Keys are category names plus "misc".
  std::map<std::string, std::string> rationale;
  int total = 0;
  ScoredBy scored_by = ScoredBy::llm;
  // Set only when a judge reported a total that disagreed with the local sum.
  std::optional<int> judge_reported_total;
  std::vector<OverrideAudit> audit;

  int score(RubricCategory category) const noexcept;
  void set_score(RubricCategory category, int value) noexcept;

  bool operator==(const RubricScorecard&) const = default;
};

/// max(0, presumptive + reductive + detail + coverage - misc). Throws
/// Error(category_out_of_range | negative_misc) on invalid inputs.
int compute_total(int presumptive, int reductive, int detail, int coverage, int misc);

std::optional<ValidationIssue> validate_scorecard(const RubricScorecard& card);

/// Builds a scorecard with its total computed locally.
RubricScorecard make_scorecard(int presumptive, int reductive, int detail, int coverage,
                               int misc = 0, std::map<std::string, std::string> rationale = {},
                               ScoredBy scored_by = ScoredBy::llm);

struct ScorerExemplar {
  BlobRef image_ref;
  std::string image_label;
  std::string description_text;
  RubricScorecard scorecard;
  std::string rationale_text;

  bool operator==(const ScorerExemplar&) const = default;
};

// ---------------------------------------------------------------------------
// Comparison runs

struct DatasetItem {
  std::string id;
  BlobRef image_ref;
  std::string image_path;
  std::optional<std::string> notes;

  bool operator==(const DatasetItem&) const = default;
};

enum class CellStatus { scored, failed };

struct ComparisonCell {
  std::string image_id;
  BlobRef image_ref;
  std::string model_id;
  CellStatus status = CellStatus::scored;
  std::string description_text;
  std::optional<RubricScorecard> scorecard;
  std::optional<std::string> error_code;
  std::optional<std::string> error_message;

  bool operator==(const ComparisonCell&) const = default;
};

struct RunMetadata {
  std::string prompt_revision;
  std::string scorer_exemplar_hash;
  std::string judge_model_id;
  int exemplar_count = 0;
  // "text_only" when exemplar images could not be sent alongside the target.
  std::string exemplar_mode;

  bool operator==(const RunMetadata&) const = default;
};

struct ComparisonRun {
  std::string run_id;
  std::vector<DatasetItem> dataset;
  std::vector<std::string> models;
  std::vector<ComparisonCell> cells;
  std::map<std::string, double> aggregates;
  RunMetadata metadata;

  const ComparisonCell* find_cell(const std::string& image_id,
                                  const std::string& model_id) const;
  ComparisonCell* find_cell(const std::string& image_id, const std::string& model_id);

  bool operator==(const ComparisonRun&) const = default;
};

std::optional<ValidationIssue> validate_run(const ComparisonRun& run);

// ---------------------------------------------------------------------------
// Canonical JSON encoding

std::string_view to_string(DescriptionKind v) noexcept;
std::string_view to_string(RevisionCause v) noexcept;
std::string_view to_string(SessionStatus v) noexcept;
std::string_view to_string(ScoredBy v) noexcept;
std::string_view to_string(CellStatus v) noexcept;

void to_json(Json& j, const BlobRef& v);
void from_json(const Json& j, BlobRef& v);
void to_json(Json& j, const Description& v);
void from_json(const Json& j, Description& v);
void to_json(Json& j, const AnalysisResult& v);
void from_json(const Json& j, AnalysisResult& v);
void to_json(Json& j, const AudioNote& v);
void from_json(const Json& j, AudioNote& v);
void to_json(Json& j, const Revision& v);
void from_json(const Json& j, Revision& v);
void to_json(Json& j, const ArtworkSession& v);
void from_json(const Json& j, ArtworkSession& v);
void to_json(Json& j, const OverrideAudit& v);
void from_json(const Json& j, OverrideAudit& v);
void to_json(Json& j, const RubricScorecard& v);
void from_json(const Json& j, RubricScorecard& v);
void to_json(Json& j, const ScorerExemplar& v);
void from_json(const Json& j, ScorerExemplar& v);
void to_json(Json& j, const DatasetItem& v);
void from_json(const Json& j, DatasetItem& v);
void to_json(Json& j, const ComparisonCell& v);
void from_json(const Json& j, ComparisonCell& v);
void to_json(Json& j, const RunMetadata& v);
void from_json(const Json& j, RunMetadata& v);
void to_json(Json& j, const ComparisonRun& v);
void from_json(const Json& j, ComparisonRun& v);

/// Decodes `j` into T, converting any JSON shape error into Error(parse_error).
template <class T>
T decode(const Json& j) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
}

}  // namespace artinsight
