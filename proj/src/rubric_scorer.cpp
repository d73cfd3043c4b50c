#include "artinsight/rubric_scorer.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artinsight/description_engine.hpp"

namespace artinsight {

namespace fs = std::filesystem;

namespace {

constexpr RubricGuideline kPresumptive{
    RubricCategory::presumptive, "Descriptions should not be presumptive.",
    R"(Is the description being presumptive, i.e. when it doesn't know something is it making inferences or assumptions about what they could be? For ex.: "The main figure in the artwork is a large, dark gray shape in the center. It's hard to say for sure what it is, but it might be a person or animal."—Ideally the description should say: "the main figure in the artwork is a large, dark gray shape in the center.")",
    R"(1/4: The description makes several assumptions, such as suggesting the main figure might be a "person or animal" and that the word "HOR" might be part of a word. It also asks the parent what the child was thinking, which is speculative.)",
    R"(4/4: The description avoids making assumptions about the intent behind the artwork. It focuses on describing the visible elements without inferring any underlying messages or reasons.)"};

constexpr RubricGuideline kReductive{
    RubricCategory::reductive, "Descriptions should not be reductive.",
    R"(Is the description being reductive, i.e. is it ever minimizing the effort or drawing style of the child? For ex., a description that says, "this is a drawing of simple stick figures" can cause the parent to dislike the use of the word "simple." Another example: "this is a rough rectangle"—descriptions that use terms like 'rough' diminish the work the child has put in.)",
    R"(2/4: The description uses phrases like "it's hard to say for sure," which can come across as dismissive. It does not fully appreciate the effort and creativity of the child.)",
    R"(4/4: The description is respectful and acknowledges the emotional depth of the artwork, using terms like "interesting and powerful piece" and "shows a lot of feeling." It does not use any diminishing language.)"};

constexpr RubricGuideline kDetail{
    RubricCategory::detail, "Descriptions should offer detailed summaries.",
    R"(Is the description too simple, i.e. only saying things like: "This is a child's drawing of a forest and some animals." Ideally the description goes into detail about the artwork.)",
    R"(2/4: The description is somewhat simple and lacks depth. It mentions the main elements but does not go into detail about the texture or the overall feel of the art.)",
    R"(4/4: The description is detailed and covers several aspects of the artwork, such as colors, shapes, textures, and the combination of drawing and crafting elements.)"};

constexpr RubricGuideline kCoverage{
    RubricCategory::coverage, "Descriptions should capture all major elements of the artwork.",
    R"(Are all the major elements of the artwork captured?)",
    R"(2/4: The description captures some major elements but misses the detail about the specific letters "HBD" in the artwork. It also does not mention the yellow color in the palm area of the handprint.)",
    R"(4/4: The description captures all the major elements: the rectangular shape, the pom-poms, the green pipe cleaner, the heart shapes, and the text at the bottom right. It provides a comprehensive view of the artwork’s details.)"};

constexpr std::string_view kJudgeIntro =
    "You are the LLM Scorer. You evaluate an AI-generated description of a child's artwork, "
    "written for a blind or low-vision family member, against the rubric below. The artwork "
    "image is attached to the request and the description to evaluate follows it.";

constexpr std::string_view kOutputSchema = R"(Respond with only one JSON object and nothing else:
{
  "presumptive": <integer 0-4>,
  "reductive": <integer 0-4>,
  "detail": <integer 0-4>,
  "coverage": <integer 0-4>,
  "misc_subtraction": <integer >= 0>,
  "rationale": {
    "presumptive": "<why points were kept or lost>",
    "reductive": "<...>",
    "detail": "<...>",
    "coverage": "<...>",
    "misc": "<what was subtracted, or empty>"
  },
  "total": <presumptive + reductive + detail + coverage - misc_subtraction, at least 0>
}
A rationale string is required for every category scored below 4.)";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::manifest_error, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string score_line(const RubricScorecard& c) {
  return fmt::format(
      "presumptive={}, reductive={}, detail={}, coverage={}, misc_subtraction={}, total={}",
      c.presumptive, c.reductive, c.detail, c.coverage, c.misc_subtraction, c.total);
}

[[noreturn]] void bad_scorecard(const std::string& message, const std::string& field) {
  throw Error(ErrorCode::scorecard_parse_error, message, field);
}

int read_int(const Json& doc, std::initializer_list<const char*> keys, const std::string& field,
             bool required) {
  for (const char* key : keys) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) continue;
    if (!it->is_number_integer()) {
      if (it->is_number_float() && it->get<double>() == static_cast<int>(it->get<double>())) {
        return static_cast<int>(it->get<double>());
      }
      bad_scorecard(fmt::format("'{}' must be an integer", key), field);
    }
    return it->get<int>();
  }
  if (required) bad_scorecard(fmt::format("missing '{}'", field), field);
  return 0;
}

}  // namespace

const std::array<RubricGuideline, 4>& rubric_guidelines() {
  static const std::array<RubricGuideline, 4> kAll = {kPresumptive, kReductive, kDetail,
                                                      kCoverage};
  return kAll;
}

const std::string_view kMiscQuestion =
    "Are there any other parts of the response which take away from the overall quality?";

std::string build_scorer_prompt(std::span<const ScorerExemplar> exemplars) {
  if (exemplars.empty()) throw Error(ErrorCode::no_exemplars, "at least one exemplar is required");
  if (exemplars.size() > kMaxExemplars) {
    throw Error(ErrorCode::invalid_value,
                fmt::format("{} exemplars given, at most {}", exemplars.size(), kMaxExemplars),
                "exemplars");
  }
  std::string out(kJudgeIntro);
  out += "\n\nRUBRIC\nEach guideline is scored on a 0-4 scale (4 is best).\n";
  for (const auto& g : rubric_guidelines()) {
    out += fmt::format("\n{}. {} [key: {}]\n{}\nExample low score: {}\nExample high score: {}\n",
                       category_letter(g.category), g.design_goal, category_name(g.category),
                       g.question, g.low_example, g.high_example);
  }
  out += fmt::format(
      "\nMiscellaneous subtraction [key: misc_subtraction]: {} Subtract whole points for any "
      "description language or errors detracting from the quality of the description; use 0 "
      "when nothing applies.\n",
      kMiscQuestion);
  out += fmt::format(
      "\nThe final score is presumptive + reductive + detail + coverage - misc_subtraction, "
      "never below 0, out of {} points.\n",
      kTotalMax);

  out += "\nSCORED EXAMPLES\n";
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const auto& ex = exemplars[i];
    if (auto issue = validate_scorecard(ex.scorecard)) {
      throw Error(ErrorCode::invalid_value,
                  fmt::format("exemplar {} scorecard: {}", i + 1, issue->message),
                  fmt::format("exemplars[{}].scorecard.{}", i, issue->field));
    }
    out += fmt::format("\nExample {}{}\nDescription:\n<<<\n{}\n>>>\nScores: {}\n", i + 1,
                       ex.image_label.empty() ? "" : fmt::format(" ({})", ex.image_label),
                       ex.description_text, score_line(ex.scorecard));
    for (auto c : kRubricCategories) {
      auto it = ex.scorecard.rationale.find(std::string(category_name(c)));
      if (it != ex.scorecard.rationale.end() && !it->second.empty()) {
        out += fmt::format("{} rationale: {}\n", category_name(c), it->second);
      }
    }
    if (auto it = ex.scorecard.rationale.find("misc");
        it != ex.scorecard.rationale.end() && !it->second.empty()) {
      out += fmt::format("misc rationale: {}\n", it->second);
    }
    out += fmt::format("Rationale: {}\n", ex.rationale_text);
  }
  out += "\nOUTPUT\n";
  out += kOutputSchema;
  return out;
}

std::string exemplar_hash(std::span<const ScorerExemplar> exemplars) {
  Json arr = Json::array();
  for (const auto& ex : exemplars) arr.push_back(ex);
  return "sha256:" + sha256_hex(arr.dump());
}

std::vector<ScorerExemplar> load_exemplar_bundle(const fs::path& manifest) {
  Json doc;
  try {
    doc = Json::parse(read_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::manifest_error, e.what(), manifest.string());
  }
  const Json& entries = doc.is_object() ? doc.value("exemplars", Json::array()) : doc;
  if (!entries.is_array()) throw Error(ErrorCode::manifest_error, "manifest must list exemplars");
  const fs::path base = manifest.parent_path();
  std::vector<ScorerExemplar> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = fmt::format("exemplars[{}]", i);
    try {
      ScorerExemplar ex;
      std::string image = read_file(base / e.at("image").get<std::string>());
      ex.image_ref = blob_ref_for(as_bytes(image));
      ex.image_label = e.value("label", e.at("image").get<std::string>());
      ex.description_text = read_file(base / e.at("description").get<std::string>());
      ex.scorecard = Json::parse(read_file(base / e.at("scorecard").get<std::string>()))
                         .get<RubricScorecard>();
      ex.rationale_text = read_file(base / e.at("rationale").get<std::string>());
      while (!ex.rationale_text.empty() && ex.rationale_text.back() == '\n') {
        ex.rationale_text.pop_back();
      }
      while (!ex.description_text.empty() && ex.description_text.back() == '\n') {
        ex.description_text.pop_back();
      }
      if (auto issue = validate_scorecard(ex.scorecard)) {
        throw Error(ErrorCode::manifest_error, issue->message, where + ".scorecard." + issue->field);
      }
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& err) {
      throw Error(ErrorCode::manifest_error, err.what(), where);
    }
  }
  if (out.empty()) throw Error(ErrorCode::no_exemplars, "exemplar bundle is empty");
  return out;
}

ParsedScorecard parse_scorecard(std::string_view raw_text, bool require_rationale) {
  auto doc = extract_json_object(raw_text);
  if (!doc) bad_scorecard("judge output is not a JSON object", "$");

  ParsedScorecard parsed;
  RubricScorecard& card = parsed.card;
  for (auto c : kRubricCategories) {
    const std::string name(category_name(c));
    const std::string letter(1, category_letter(c));
    int v = read_int(*doc, {name.c_str(), letter.c_str()}, name, true);
    if (v < 0 || v > kCategoryMax) {
      bad_scorecard(fmt::format("{} = {} is outside 0-{}", name, v, kCategoryMax), name);
    }
    card.set_score(c, v);
  }
  card.misc_subtraction = read_int(*doc, {"misc_subtraction", "misc"}, "misc_subtraction", false);
  if (card.misc_subtraction < 0) bad_scorecard("misc_subtraction is negative", "misc_subtraction");

  if (auto r = doc->find("rationale"); r != doc->end() && r->is_object()) {
    for (const auto& [key, value] : r->items()) {
      if (!value.is_string()) continue;
      std::string normalized = key;
      if (auto c = category_from_name(key)) normalized = std::string(category_name(*c));
      if (key == "misc_subtraction") normalized = "misc";
      if (!value.get_ref<const std::string&>().empty()) {
        card.rationale[normalized] = value.get<std::string>();
      }
    }
  }
  if (require_rationale) {
    for (auto c : kRubricCategories) {
      const std::string name(category_name(c));
      if (card.score(c) < kCategoryMax && !card.rationale.contains(name)) {
        bad_scorecard(fmt::format("missing rationale for {} scored {}", name, card.score(c)),
                      "rationale." + name);
      }
    }
  }

  card.total = compute_total(card.presumptive, card.reductive, card.detail, card.coverage,
                             card.misc_subtraction);
  card.scored_by = ScoredBy::llm;
  if (auto t = doc->find("total"); t != doc->end() && t->is_number()) {
    int reported = static_cast<int>(t->get<double>());
    if (reported != card.total) {
      card.judge_reported_total = reported;
      parsed.warnings.push_back(fmt::format("judge reported total {} but categories give {}",
                                            reported, card.total));
    }
  }
  return parsed;
}

RubricScorecard apply_human_override(const RubricScorecard& card,
                                     const std::map<std::string, int>& corrections,
                                     const std::string& note) {
  if (note.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::empty_note, "an override needs a note", "note");
  }
  RubricScorecard next = card;
  for (const auto& [key, value] : corrections) {
    if (key == "misc_subtraction" || key == "misc") {
      if (value < 0) throw Error(ErrorCode::negative_misc, "misc_subtraction is negative", key);
      next.misc_subtraction = value;
    } else if (auto c = category_from_name(key)) {
      if (value < 0 || value > kCategoryMax) {
        throw Error(ErrorCode::category_out_of_range,
                    fmt::format("{} = {} is outside 0-{}", key, value, kCategoryMax),
                    std::string(category_name(*c)));
      }
      next.set_score(*c, value);
    } else {
      throw Error(ErrorCode::invalid_value, fmt::format("unknown rubric key '{}'", key), key);
    }
  }
  OverrideAudit audit;
  audit.presumptive = card.presumptive;
  audit.reductive = card.reductive;
  audit.detail = card.detail;
  audit.coverage = card.coverage;
  audit.misc_subtraction = card.misc_subtraction;
  audit.total = card.total;
  audit.scored_by = card.scored_by;
  audit.rationale = card.rationale;
  audit.corrections = corrections;
  audit.note = note;
  next.audit.push_back(std::move(audit));
  next.total = compute_total(next.presumptive, next.reductive, next.detail, next.coverage,
                             next.misc_subtraction);
  next.scored_by = ScoredBy::human_override;
  next.judge_reported_total.reset();
  return next;
}

RubricScorer::RubricScorer(Gateway& gateway, const BlobReader& blobs,
                           std::vector<ScorerExemplar> exemplars, ScorerConfig config)
    : gateway_(gateway),
      blobs_(blobs),
      exemplars_(std::move(exemplars)),
      config_(std::move(config)),
      prompt_(build_scorer_prompt(exemplars_)),
      exemplar_hash_(artinsight::exemplar_hash(exemplars_)) {}

ProviderRequest RubricScorer::build_request(const ImagePayload& image,
                                            const std::string& description,
                                            const std::string& judge_model_id) const {
  ProviderRequest request;
  request.model_id = judge_model_id;
  request.temperature = config_.temperature;
  request.max_output_tokens = config_.max_output_tokens;
  request.timeout_ms = config_.timeout_ms;
  request.parts.push_back({Role::system, prompt_});
  request.parts.push_back({Role::user, image});
  request.parts.push_back(
      {Role::user, fmt::format("Description to evaluate:\n<<<\n{}\n>>>", description)});
  return request;
}

RubricScorecard RubricScorer::score_description(const BlobRef& image_ref,
                                                const std::string& description,
                                                std::optional<std::string> judge_model_id) const {
  if (description.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::empty_description, "description is empty", "description_text");
  }
  const std::string judge = judge_model_id.value_or(config_.judge_model_id);
  ImagePayload image = load_image_payload(blobs_, image_ref, config_.image_size_limit);
  ProviderRequest request = build_request(image, description, judge);

  auto accept = [&](ParsedScorecard parsed) {
    for (const auto& w : parsed.warnings) spdlog::warn("scorer {}: {}", judge, w);
    return std::move(parsed.card);
  };
  try {
    return accept(parse_scorecard(gateway_.send(request).raw_text));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::scorecard_parse_error) throw;
    spdlog::info("judge {} broke the scorecard schema ({}); sending repair request", judge,
                 e.what());
    request.parts.push_back(
        {Role::user,
         fmt::format("Your previous answer could not be used ({}). Respond again with only the "
                     "JSON object in the OUTPUT format, including a rationale for every "
                     "category scored below 4.",
                     e.what())});
  }
  return accept(parse_scorecard(gateway_.send(request).raw_text));
}

}  // namespace artinsight
