#include "artinsight/description_engine.hpp"

#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artinsight/media.hpp"

namespace artinsight {

namespace {

std::string trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string required_text(const Json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) {
    throw Error(ErrorCode::parse_error, fmt::format("missing '{}'", key), key);
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::parse_error, fmt::format("'{}' must be a string", key), key);
  }
  std::string text = trimmed(it->get_ref<const std::string&>());
  if (text.empty()) throw Error(ErrorCode::parse_error, fmt::format("'{}' is empty", key), key);
  return text;
}

std::string repair_instruction(const Error& e) {
  return fmt::format(
      "Your previous response could not be used ({}). Respond again with only the JSON object "
      "described in the instructions: non-empty \"title\", \"descriptive\" and \"creative\" "
      "strings and a \"questions\" array of exactly 3 non-empty strings.",
      e.what());
}

}  // namespace

std::optional<Json> extract_json_object(std::string_view raw_text) {
  Json whole = Json::parse(raw_text.begin(), raw_text.end(), nullptr, false);
  if (!whole.is_discarded() && whole.is_object()) return whole;
  auto open = raw_text.find('{');
  auto close = raw_text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  auto inner = raw_text.substr(open, close - open + 1);
  Json doc = Json::parse(inner.begin(), inner.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  return doc;
}

AnalysisResult parse_analysis(std::string_view raw_text, Timestamp generated_at) {
  auto doc = extract_json_object(raw_text);
  if (!doc) throw Error(ErrorCode::parse_error, "response is not a JSON object", "$");

  AnalysisResult result;
  result.title = required_text(*doc, "title");
  result.descriptive = {DescriptionKind::descriptive, required_text(*doc, "descriptive"),
                        generated_at};
  result.creative = {DescriptionKind::creative, required_text(*doc, "creative"), generated_at};

  auto q = doc->find("questions");
  if (q == doc->end() || !q->is_array()) {
    throw Error(ErrorCode::parse_error, "'questions' must be an array", "questions");
  }
  if (q->size() != kQuestionCount) {
    throw Error(ErrorCode::parse_error,
                fmt::format("expected {} questions, got {}", kQuestionCount, q->size()),
                "questions");
  }
  for (std::size_t i = 0; i < q->size(); ++i) {
    const auto& item = (*q)[i];
    std::string field = fmt::format("questions[{}]", i);
    if (!item.is_string()) throw Error(ErrorCode::parse_error, "question must be a string", field);
    std::string text = trimmed(item.get_ref<const std::string&>());
    if (text.empty()) throw Error(ErrorCode::parse_error, "question is empty", field);
    result.questions.push_back(std::move(text));
  }
  for (const auto* d : {&result.descriptive, &result.creative}) {
    for (const auto& w : lint_description(d->text)) {
      spdlog::warn("{} description lint: {}", to_string(d->kind), w);
    }
  }
  return result;
}

ImagePayload load_image_payload(const BlobReader& blobs, const BlobRef& ref, std::size_t limit) {
  Blob blob = blobs.get_blob(ref);
  if (blob.bytes.size() > limit) {
    throw Error(ErrorCode::image_too_large,
                fmt::format("image is {} bytes, limit {}", blob.bytes.size(), limit), "image");
  }
  auto format = detect_image(blob.bytes);
  if (!format) throw Error(ErrorCode::bad_image, "image is not a decodable PNG or JPEG", "image");
  return ImagePayload{std::string(media_type(*format)), base64_encode(blob.bytes)};
}

DescriptionEngine::DescriptionEngine(Gateway& gateway, const BlobReader& blobs,
                                     PromptBundle bundle, EngineConfig config)
    : gateway_(gateway), blobs_(blobs), bundle_(std::move(bundle)), config_(std::move(config)) {
  if (auto issue = validate_bundle(bundle_)) {
    throw Error(issue->code, issue->message, issue->field);
  }
  if (!bundle_.matches_canonical()) {
    spdlog::warn("prompt bundle {} differs from the canonical prompts", bundle_.revision);
  }
}

ProviderRequest DescriptionEngine::build_request(const ImagePayload& image,
                                                 const std::string& model_id,
                                                 std::optional<std::string_view> transcript) const {
  ProviderRequest request;
  request.model_id = model_id;
  request.max_output_tokens = config_.max_output_tokens;
  request.temperature = config_.temperature;
  request.timeout_ms = config_.timeout_ms;
  request.parts.push_back({Role::system, assemble_prompt(bundle_, transcript)});
  request.parts.push_back({Role::user, image});
  request.parts.push_back({Role::user, std::string(kDescribeInstruction)});
  return request;
}

AnalysisResult DescriptionEngine::analyze_artwork(const BlobRef& image_ref,
                                                  std::optional<std::string> model_id,
                                                  std::optional<std::string> transcript) const {
  const std::string model = model_id.value_or(config_.default_model_id);
  ImagePayload image = load_image_payload(blobs_, image_ref, config_.image_size_limit);
  std::optional<std::string_view> context;
  if (transcript) context = *transcript;
  ProviderRequest request = build_request(image, model, context);

  auto finish = [&](AnalysisResult r) {
    r.model_id = model;
    r.prompt_revision = bundle_.revision;
    return r;
  };
  ProviderResponse first = gateway_.send(request);
  try {
    return finish(parse_analysis(first.raw_text));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::parse_error) throw;
    spdlog::info("analysis from {} broke the output schema ({}); sending repair request", model,
                 e.what());
    request.parts.push_back({Role::user, repair_instruction(e)});
  }
  ProviderResponse second = gateway_.send(request);
  return finish(parse_analysis(second.raw_text));
}

ArtworkSession DescriptionEngine::describe_session(const ArtworkSession& pending,
                                                   std::optional<std::string> model_id) const {
  if (!pending.revisions.empty()) {
    throw Error(ErrorCode::invalid_state, "session already has an initial revision", "revisions");
  }
  AnalysisResult result = analyze_artwork(pending.image_ref, std::move(model_id));
  ArtworkSession next = append_revision(pending, result, RevisionCause::initial);
  next.title = result.title;
  next.status = SessionStatus::ready;
  next.error.reset();
  return next;
}

ArtworkSession DescriptionEngine::reprompt_with_transcript(const ArtworkSession& session,
                                                           const std::string& transcript,
                                                           std::optional<std::string> model_id) const {
  std::string text = trimmed(transcript);
  if (text.empty()) throw Error(ErrorCode::empty_transcript, "transcript is empty", "transcript");
  if (session.status != SessionStatus::ready || !session.current) {
    throw Error(ErrorCode::invalid_state, "session is not ready", "status");
  }
  std::string model = model_id.value_or(session.current->model_id.empty()
                                            ? config_.default_model_id
                                            : session.current->model_id);
  AnalysisResult result = analyze_artwork(session.image_ref, model, text);
  return append_revision(session, std::move(result), RevisionCause::transcript_reprompt, text);
}

}  // namespace artinsight
