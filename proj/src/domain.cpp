#include "artinsight/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>

#include <fmt/format.h>

namespace artinsight {

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool blank(std::string_view s) { return trim_view(s).empty(); }

template <class Enum, std::size_t N>
Enum enum_from(const Json& j, const std::array<Enum, N>& values, std::string_view what) {
  const auto& text = j.get_ref<const std::string&>();
  for (auto v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorCode::parse_error, fmt::format("unknown {} '{}'", what, text),
              std::string(what));
}

template <class T>
void put_optional(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <class T>
void get_optional(const Json& j, const char* key, std::optional<T>& out) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    out.reset();
  } else {
    out = it->template get<T>();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Time

Timestamp now_ms() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  auto secs = floor<seconds>(ts);
  auto ms = (ts - secs).count();
  std::time_t t = system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900,
                     tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

Timestamp parse_timestamp(std::string_view text) {
  std::tm tm{};
  int ms = 0;
  int consumed = 0;
  std::string s(text);
  int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year, &tm.tm_mon,
                      &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms, &consumed);
  if (n != 7 || static_cast<std::size_t>(consumed) != s.size()) {
    throw Error(ErrorCode::parse_error, fmt::format("bad timestamp '{}'", s), "timestamp");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::tm fields = tm;
  std::time_t t = timegm(&tm);
  // timegm normalizes out-of-range fields; a changed field means the input
  // named a date that does not exist.
  if (ms < 0 || ms > 999 || tm.tm_year != fields.tm_year || tm.tm_mon != fields.tm_mon ||
      tm.tm_mday != fields.tm_mday || tm.tm_hour != fields.tm_hour || tm.tm_min != fields.tm_min ||
      tm.tm_sec != fields.tm_sec) {
    throw Error(ErrorCode::parse_error, fmt::format("bad timestamp '{}'", s), "timestamp");
  }
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::from_time_t(t)) +
         std::chrono::milliseconds(ms);
}

// ---------------------------------------------------------------------------
// Descriptions and analysis

std::vector<std::string> lint_description(std::string_view text) {
  std::vector<std::string> warnings;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim_view(text.substr(pos, end - pos));
    ++line_no;
    bool marker = false;
    if (line.starts_with("- ") || line.starts_with("* ") || line.starts_with("•")) {
      marker = true;
    } else {
      std::size_t i = 0;
      while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
      if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) marker = true;
    }
    if (marker) warnings.push_back(fmt::format("line {}: starts with a list marker", line_no));
    pos = end + 1;
  }
  return warnings;
}

std::optional<ValidationIssue> validate_analysis(const AnalysisResult& result) {
  if (blank(result.title)) return ValidationIssue{ErrorCode::parse_error, "title", "empty title"};
  if (result.descriptive.kind != DescriptionKind::descriptive) {
    return ValidationIssue{ErrorCode::invalid_value, "descriptive.kind", "wrong kind"};
  }
  if (result.creative.kind != DescriptionKind::creative) {
    return ValidationIssue{ErrorCode::invalid_value, "creative.kind", "wrong kind"};
  }
  if (blank(result.descriptive.text)) {
    return ValidationIssue{ErrorCode::parse_error, "descriptive", "empty descriptive text"};
  }
  if (blank(result.creative.text)) {
    return ValidationIssue{ErrorCode::parse_error, "creative", "empty creative text"};
  }
  if (result.questions.size() != kQuestionCount) {
    return ValidationIssue{ErrorCode::parse_error, "questions",
                           fmt::format("expected {} questions, got {}", kQuestionCount,
                                       result.questions.size())};
  }
  for (std::size_t i = 0; i < result.questions.size(); ++i) {
    if (blank(result.questions[i])) {
      return ValidationIssue{ErrorCode::parse_error, fmt::format("questions[{}]", i),
                             "empty question"};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sessions

std::optional<ValidationIssue> validate_session(const ArtworkSession& s) {
  if (s.session_id.empty()) {
    return ValidationIssue{ErrorCode::invalid_value, "session_id", "empty id"};
  }
  if (s.image_ref.empty()) {
    return ValidationIssue{ErrorCode::invalid_value, "image_ref", "missing image"};
  }
  if (s.status == SessionStatus::ready && s.revisions.empty()) {
    return ValidationIssue{ErrorCode::invalid_state, "revisions", "ready session has no revisions"};
  }
  for (std::size_t i = 0; i < s.revisions.size(); ++i) {
    const auto& rev = s.revisions[i];
    if (rev.number != static_cast<int>(i)) {
      return ValidationIssue{ErrorCode::invalid_state, fmt::format("revisions[{}].number", i),
                             "revision numbers must be consecutive from 0"};
    }
    if (rev.cause == RevisionCause::initial && i != 0) {
      return ValidationIssue{ErrorCode::invalid_state, fmt::format("revisions[{}].cause", i),
                             "only revision 0 may be initial"};
    }
    if (auto issue = validate_analysis(rev.result)) {
      issue->field = fmt::format("revisions[{}].{}", i, issue->field);
      return issue;
    }
  }
  if (!s.revisions.empty()) {
    if (!s.current || *s.current != s.revisions.back().result) {
      return ValidationIssue{ErrorCode::invalid_state, "current",
                             "current must equal the last revision"};
    }
  } else if (s.current) {
    return ValidationIssue{ErrorCode::invalid_state, "current", "current set without revisions"};
  }
  if (s.audio && s.audio->duration_ms <= 0) {
    return ValidationIssue{ErrorCode::invalid_value, "audio.duration_ms", "must be positive"};
  }
  return std::nullopt;
}

ArtworkSession append_revision(const ArtworkSession& session, AnalysisResult result,
                               RevisionCause cause, std::optional<std::string> transcript) {
  ArtworkSession next = session;
  Revision rev;
  rev.number = static_cast<int>(next.revisions.size());
  rev.cause = cause;
  rev.result = std::move(result);
  rev.transcript = std::move(transcript);
  next.current = rev.result;
  next.revisions.push_back(std::move(rev));
  return next;
}

// ---------------------------------------------------------------------------
// Rubric

std::string_view category_name(RubricCategory c) noexcept {
  switch (c) {
    case RubricCategory::presumptive:
      return "presumptive";
    case RubricCategory::reductive:
      return "reductive";
    case RubricCategory::detail:
      return "detail";
    case RubricCategory::coverage:
      return "coverage";
  }
  return "";
}

char category_letter(RubricCategory c) noexcept {
  return static_cast<char>('A' + static_cast<int>(c));
}

std::optional<RubricCategory> category_from_name(std::string_view name) noexcept {
  for (auto c : kRubricCategories) {
    if (category_name(c) == name) return c;
    if (name.size() == 1 && std::toupper(static_cast<unsigned char>(name[0])) == category_letter(c)) {
      return c;
    }
  }
  return std::nullopt;
}

int RubricScorecard::score(RubricCategory c) const noexcept {
  switch (c) {
    case RubricCategory::presumptive:
      return presumptive;
    case RubricCategory::reductive:
      return reductive;
    case RubricCategory::detail:
      return detail;
    case RubricCategory::coverage:
      return coverage;
  }
  return 0;
}

void RubricScorecard::set_score(RubricCategory c, int value) noexcept {
  switch (c) {
    case RubricCategory::presumptive:
      presumptive = value;
      break;
    case RubricCategory::reductive:
      reductive = value;
      break;
    case RubricCategory::detail:
      detail = value;
      break;
    case RubricCategory::coverage:
      coverage = value;
      break;
  }
}

int compute_total(int presumptive, int reductive, int detail, int coverage, int misc) {
  const std::array<std::pair<RubricCategory, int>, 4> scores = {{
      {RubricCategory::presumptive, presumptive},
      {RubricCategory::reductive, reductive},
      {RubricCategory::detail, detail},
      {RubricCategory::coverage, coverage},
  }};
  for (auto [category, value] : scores) {
    if (value < 0 || value > kCategoryMax) {
      throw Error(ErrorCode::category_out_of_range,
                  fmt::format("{} = {} is outside 0-{}", category_name(category), value,
                              kCategoryMax),
                  std::string(category_name(category)));
    }
  }
  if (misc < 0) {
    throw Error(ErrorCode::negative_misc, fmt::format("misc_subtraction = {}", misc),
                "misc_subtraction");
  }
  return std::max(0, presumptive + reductive + detail + coverage - misc);
}

std::optional<ValidationIssue> validate_scorecard(const RubricScorecard& card) {
  for (auto c : kRubricCategories) {
    int v = card.score(c);
    if (v < 0 || v > kCategoryMax) {
      return ValidationIssue{ErrorCode::category_out_of_range, std::string(category_name(c)),
                             fmt::format("{} is outside 0-{}", v, kCategoryMax)};
    }
  }
  if (card.misc_subtraction < 0) {
    return ValidationIssue{ErrorCode::negative_misc, "misc_subtraction",
                           fmt::format("{} is negative", card.misc_subtraction)};
  }
  int expected = compute_total(card.presumptive, card.reductive, card.detail, card.coverage,
                               card.misc_subtraction);
  if (card.total != expected) {
    return ValidationIssue{ErrorCode::total_mismatch, "total",
                           fmt::format("total {} but categories give {}", card.total, expected)};
  }
  return std::nullopt;
}

RubricScorecard make_scorecard(int presumptive, int reductive, int detail, int coverage, int misc,
                               std::map<std::string, std::string> rationale, ScoredBy scored_by) {
  RubricScorecard card;
  card.total = compute_total(presumptive, reductive, detail, coverage, misc);
  card.presumptive = presumptive;
  card.reductive = reductive;
  card.detail = detail;
  card.coverage = coverage;
  card.misc_subtraction = misc;
  card.rationale = std::move(rationale);
  card.scored_by = scored_by;
  return card;
}

// ---------------------------------------------------------------------------
// Runs

const ComparisonCell* ComparisonRun::find_cell(const std::string& image_id,
                                               const std::string& model_id) const {
  auto it = std::find_if(cells.begin(), cells.end(), [&](const ComparisonCell& c) {
    return c.image_id == image_id && c.model_id == model_id;
  });
  return it == cells.end() ? nullptr : &*it;
}

ComparisonCell* ComparisonRun::find_cell(const std::string& image_id,
                                         const std::string& model_id) {
  return const_cast<ComparisonCell*>(std::as_const(*this).find_cell(image_id, model_id));
}

std::optional<ValidationIssue> validate_run(const ComparisonRun& run) {
  if (run.cells.size() > run.dataset.size() * run.models.size()) {
    return ValidationIssue{ErrorCode::invalid_state, "cells", "more cells than dataset x models"};
  }
  for (std::size_t i = 0; i < run.cells.size(); ++i) {
    const auto& cell = run.cells[i];
    if (cell.status == CellStatus::scored) {
      if (!cell.scorecard) {
        return ValidationIssue{ErrorCode::invalid_state, fmt::format("cells[{}].scorecard", i),
                               "scored cell without scorecard"};
      }
      if (auto issue = validate_scorecard(*cell.scorecard)) {
        issue->field = fmt::format("cells[{}].scorecard.{}", i, issue->field);
        return issue;
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// JSON

std::string_view to_string(DescriptionKind v) noexcept {
  return v == DescriptionKind::descriptive ? "descriptive" : "creative";
}
std::string_view to_string(RevisionCause v) noexcept {
  return v == RevisionCause::initial ? "initial" : "transcript_reprompt";
}
std::string_view to_string(SessionStatus v) noexcept {
  switch (v) {
    case SessionStatus::pending:
      return "pending";
    case SessionStatus::ready:
      return "ready";
    case SessionStatus::failed:
      return "failed";
  }
  return "";
}
std::string_view to_string(ScoredBy v) noexcept {
  return v == ScoredBy::llm ? "llm" : "human_override";
}
std::string_view to_string(CellStatus v) noexcept {
  return v == CellStatus::scored ? "scored" : "failed";
}

void to_json(Json& j, const BlobRef& v) { j = v.value; }
void from_json(const Json& j, BlobRef& v) { v.value = j.get<std::string>(); }

void to_json(Json& j, const Description& v) {
  j = Json{{"kind", to_string(v.kind)},
           {"text", v.text},
           {"generated_at", format_timestamp(v.generated_at)}};
}
void from_json(const Json& j, Description& v) {
  v.kind = enum_from(j.at("kind"),
                     std::array{DescriptionKind::descriptive, DescriptionKind::creative},
                     "kind");
  v.text = j.at("text").get<std::string>();
  v.generated_at = parse_timestamp(j.at("generated_at").get<std::string>());
}

void to_json(Json& j, const AnalysisResult& v) {
  j = Json{{"title", v.title},       {"descriptive", v.descriptive},
           {"creative", v.creative}, {"questions", v.questions},
           {"model_id", v.model_id}, {"prompt_revision", v.prompt_revision}};
}
void from_json(const Json& j, AnalysisResult& v) {
  v.title = j.at("title").get<std::string>();
  v.descriptive = j.at("descriptive").get<Description>();
  v.creative = j.at("creative").get<Description>();
  v.questions = j.at("questions").get<std::vector<std::string>>();
  v.model_id = j.at("model_id").get<std::string>();
  v.prompt_revision = j.at("prompt_revision").get<std::string>();
}

void to_json(Json& j, const AudioNote& v) {
  j = Json{{"audio_ref", v.audio_ref},     {"media_type", v.media_type},
           {"duration_ms", v.duration_ms}, {"transcript", v.transcript},
           {"transcriber_id", v.transcriber_id}};
}
void from_json(const Json& j, AudioNote& v) {
  v.audio_ref = j.at("audio_ref").get<BlobRef>();
  v.media_type = j.at("media_type").get<std::string>();
  v.duration_ms = j.at("duration_ms").get<std::int64_t>();
  v.transcript = j.at("transcript").get<std::string>();
  v.transcriber_id = j.at("transcriber_id").get<std::string>();
}

void to_json(Json& j, const Revision& v) {
  j = Json{{"revision_number", v.number}, {"result", v.result}, {"cause", to_string(v.cause)}};
  put_optional(j, "transcript", v.transcript);
}
void from_json(const Json& j, Revision& v) {
  v.number = j.at("revision_number").get<int>();
  v.result = j.at("result").get<AnalysisResult>();
  v.cause = enum_from(j.at("cause"),
                      std::array{RevisionCause::initial, RevisionCause::transcript_reprompt},
                      "cause");
  get_optional(j, "transcript", v.transcript);
}

void to_json(Json& j, const ArtworkSession& v) {
  j = Json{{"schema_version", 1},
           {"session_id", v.session_id},
           {"created_at", format_timestamp(v.created_at)},
           {"image_ref", v.image_ref},
           {"image_media_type", v.image_media_type},
           {"title", v.title},
           {"revisions", v.revisions},
           {"status", to_string(v.status)},
           {"store_version", v.store_version}};
  put_optional(j, "current", v.current);
  put_optional(j, "audio", v.audio);
  put_optional(j, "error", v.error);
}
void from_json(const Json& j, ArtworkSession& v) {
  v.session_id = j.at("session_id").get<std::string>();
  v.created_at = parse_timestamp(j.at("created_at").get<std::string>());
  v.image_ref = j.at("image_ref").get<BlobRef>();
  v.image_media_type = j.at("image_media_type").get<std::string>();
  v.title = j.at("title").get<std::string>();
  v.revisions = j.at("revisions").get<std::vector<Revision>>();
  v.status = enum_from(
      j.at("status"),
      std::array{SessionStatus::pending, SessionStatus::ready, SessionStatus::failed}, "status");
  v.store_version = j.at("store_version").get<std::int64_t>();
  get_optional(j, "current", v.current);
  get_optional(j, "audio", v.audio);
  get_optional(j, "error", v.error);
}

void to_json(Json& j, const OverrideAudit& v) {
  j = Json{{"presumptive", v.presumptive},
           {"reductive", v.reductive},
           {"detail", v.detail},
           {"coverage", v.coverage},
           {"misc_subtraction", v.misc_subtraction},
           {"total", v.total},
           {"scored_by", to_string(v.scored_by)},
           {"rationale", v.rationale},
           {"corrections", v.corrections},
           {"note", v.note}};
}
void from_json(const Json& j, OverrideAudit& v) {
  v.presumptive = j.at("presumptive").get<int>();
  v.reductive = j.at("reductive").get<int>();
  v.detail = j.at("detail").get<int>();
  v.coverage = j.at("coverage").get<int>();
  v.misc_subtraction = j.at("misc_subtraction").get<int>();
  v.total = j.at("total").get<int>();
  v.scored_by =
      enum_from(j.at("scored_by"), std::array{ScoredBy::llm, ScoredBy::human_override}, "scored_by");
  v.rationale = j.at("rationale").get<std::map<std::string, std::string>>();
  v.corrections = j.at("corrections").get<std::map<std::string, int>>();
  v.note = j.at("note").get<std::string>();
}

void to_json(Json& j, const RubricScorecard& v) {
  j = Json{{"presumptive", v.presumptive},
           {"reductive", v.reductive},
           {"detail", v.detail},
           {"coverage", v.coverage},
           {"misc_subtraction", v.misc_subtraction},
           {"rationale", v.rationale},
           {"total", v.total},
           {"scored_by", to_string(v.scored_by)}};
  put_optional(j, "judge_reported_total", v.judge_reported_total);
  if (!v.audit.empty()) j["audit"] = v.audit;
}
void from_json(const Json& j, RubricScorecard& v) {
  v.presumptive = j.at("presumptive").get<int>();
  v.reductive = j.at("reductive").get<int>();
  v.detail = j.at("detail").get<int>();
  v.coverage = j.at("coverage").get<int>();
  v.misc_subtraction = j.at("misc_subtraction").get<int>();
  v.rationale = j.value("rationale", std::map<std::string, std::string>{});
  v.total = j.at("total").get<int>();
  v.scored_by =
      enum_from(j.at("scored_by"), std::array{ScoredBy::llm, ScoredBy::human_override}, "scored_by");
  get_optional(j, "judge_reported_total", v.judge_reported_total);
  v.audit = j.value("audit", std::vector<OverrideAudit>{});
}

void to_json(Json& j, const ScorerExemplar& v) {
  j = Json{{"image_ref", v.image_ref},
           {"image_label", v.image_label},
           {"description_text", v.description_text},
           {"scorecard", v.scorecard},
           {"rationale_text", v.rationale_text}};
}
void from_json(const Json& j, ScorerExemplar& v) {
  v.image_ref = j.at("image_ref").get<BlobRef>();
  v.image_label = j.value("image_label", std::string{});
  v.description_text = j.at("description_text").get<std::string>();
  v.scorecard = j.at("scorecard").get<RubricScorecard>();
  v.rationale_text = j.at("rationale_text").get<std::string>();
}

void to_json(Json& j, const DatasetItem& v) {
  j = Json{{"id", v.id}, {"image_ref", v.image_ref}, {"image_path", v.image_path}};
  put_optional(j, "notes", v.notes);
}
void from_json(const Json& j, DatasetItem& v) {
  v.id = j.at("id").get<std::string>();
  v.image_ref = j.at("image_ref").get<BlobRef>();
  v.image_path = j.value("image_path", std::string{});
  get_optional(j, "notes", v.notes);
}

void to_json(Json& j, const ComparisonCell& v) {
  j = Json{{"image_id", v.image_id},
           {"image_ref", v.image_ref},
           {"model_id", v.model_id},
           {"status", to_string(v.status)},
           {"description_text", v.description_text}};
  put_optional(j, "scorecard", v.scorecard);
  put_optional(j, "error_code", v.error_code);
  put_optional(j, "error_message", v.error_message);
}
void from_json(const Json& j, ComparisonCell& v) {
  v.image_id = j.at("image_id").get<std::string>();
  v.image_ref = j.at("image_ref").get<BlobRef>();
  v.model_id = j.at("model_id").get<std::string>();
  v.status = enum_from(j.at("status"), std::array{CellStatus::scored, CellStatus::failed}, "status");
  v.description_text = j.at("description_text").get<std::string>();
  get_optional(j, "scorecard", v.scorecard);
  get_optional(j, "error_code", v.error_code);
  get_optional(j, "error_message", v.error_message);
}

void to_json(Json& j, const RunMetadata& v) {
  j = Json{{"prompt_revision", v.prompt_revision},
           {"scorer_exemplar_hash", v.scorer_exemplar_hash},
           {"judge_model_id", v.judge_model_id},
           {"exemplar_count", v.exemplar_count},
           {"exemplar_mode", v.exemplar_mode}};
}
void from_json(const Json& j, RunMetadata& v) {
  v.prompt_revision = j.at("prompt_revision").get<std::string>();
  v.scorer_exemplar_hash = j.at("scorer_exemplar_hash").get<std::string>();
  v.judge_model_id = j.at("judge_model_id").get<std::string>();
  v.exemplar_count = j.at("exemplar_count").get<int>();
  v.exemplar_mode = j.at("exemplar_mode").get<std::string>();
}

void to_json(Json& j, const ComparisonRun& v) {
  j = Json{{"schema_version", 1},       {"run_id", v.run_id},
           {"dataset", v.dataset},      {"models", v.models},
           {"cells", v.cells},          {"aggregates", v.aggregates},
           {"metadata", v.metadata}};
}
void from_json(const Json& j, ComparisonRun& v) {
  v.run_id = j.at("run_id").get<std::string>();
  v.dataset = j.at("dataset").get<std::vector<DatasetItem>>();
  v.models = j.at("models").get<std::vector<std::string>>();
  v.cells = j.at("cells").get<std::vector<ComparisonCell>>();
  v.aggregates = j.at("aggregates").get<std::map<std::string, double>>();
  v.metadata = j.at("metadata").get<RunMetadata>();
}

}  // namespace artinsight
