#include <doctest.h>

#include "artinsight/rubric_scorer.hpp"
#include "test_support.hpp"

using namespace artinsight;

namespace {

ScorerExemplar exemplar(int i, RubricScorecard card) {
  ScorerExemplar ex;
  ex.image_ref = blob_ref_for(testsupport::make_png(4, 4, static_cast<std::uint64_t>(i)));
  ex.image_label = "Exemplar " + std::to_string(i);
  ex.description_text = "Description number " + std::to_string(i) + ".";
  ex.scorecard = std::move(card);
  ex.rationale_text = "Overall note " + std::to_string(i);
  return ex;
}

std::vector<ScorerExemplar> exemplars(int n) {
  std::vector<ScorerExemplar> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(exemplar(i, make_scorecard(4, 3, 4, 4, 0, {{"reductive", "omits shapes " + std::to_string(i)}})));
  }
  return out;
}

}  // namespace

TEST_CASE("rubric guidelines cover A-D in order") {
  const auto& g = rubric_guidelines();
  CHECK(g[0].category == RubricCategory::presumptive);
  CHECK(g[3].category == RubricCategory::coverage);
  for (const auto& item : g) {
    CHECK_FALSE(item.question.empty());
    CHECK_FALSE(item.low_example.empty());
    CHECK_FALSE(item.high_example.empty());
  }
}

TEST_CASE("judge prompt lists each exemplar once, in order") {
  auto ex = exemplars(3);
  std::string prompt = build_scorer_prompt(ex);
  std::size_t last = 0;
  for (const auto& e : ex) {
    auto at = prompt.find(e.description_text);
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    CHECK(prompt.find(e.description_text, at + 1) == std::string::npos);
    CHECK(prompt.find(e.scorecard.rationale.at("reductive")) != std::string::npos);
    last = at;
  }
  CHECK(prompt.find(std::string(kMiscQuestion)) != std::string::npos);
  CHECK(prompt.find("misc_subtraction") != std::string::npos);
  CHECK(prompt.rfind("You are the LLM Scorer", 0) == 0);
}

TEST_CASE("exemplar count limits") {
  try {
    build_scorer_prompt({});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::no_exemplars);
  }
  CHECK_NOTHROW(build_scorer_prompt(exemplars(static_cast<int>(kMaxExemplars))));
  auto too_many = exemplars(static_cast<int>(kMaxExemplars) + 1);
  try {
    build_scorer_prompt(too_many);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_value);
  }
}

TEST_CASE("exemplar hash is stable and content sensitive") {
  auto a = exemplars(2);
  auto b = exemplars(2);
  CHECK(exemplar_hash(a) == exemplar_hash(b));
  b[1].description_text += " ";
  CHECK(exemplar_hash(a) != exemplar_hash(b));
  std::swap(b[0], b[1]);
  CHECK(exemplar_hash(a) != exemplar_hash(b));
}

TEST_CASE("parse_scorecard accepts names or letters and recomputes the total") {
  auto p = parse_scorecard(
      R"({"A": 2, "B": 4, "C": 4, "D": 3, "misc": 1, "total": 12,
          "rationale": {"A": "calls it a party", "D": "misses the text"}})");
  CHECK(p.card.presumptive == 2);
  CHECK(p.card.coverage == 3);
  CHECK(p.card.misc_subtraction == 1);
  CHECK(p.card.total == 12);
  CHECK_FALSE(p.card.judge_reported_total.has_value());
  CHECK(p.card.rationale.at("presumptive") == "calls it a party");
  CHECK(p.warnings.empty());

  auto wrong = parse_scorecard(
      "```json\n{\"presumptive\":4,\"reductive\":4,\"detail\":4,\"coverage\":4,\"misc_subtraction\":0,\"total\":15}\n```");
  CHECK(wrong.card.total == 16);
  CHECK(wrong.card.judge_reported_total == std::optional<int>(15));
  CHECK(wrong.warnings.size() == 1);
}

TEST_CASE("parse_scorecard rejects malformed judge output") {
  auto expect_bad = [](const std::string& raw, bool need_rationale = true) {
    try {
      parse_scorecard(raw, need_rationale);
      FAIL("expected throw: " << raw);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::scorecard_parse_error);
    }
  };
  expect_bad("no scores here");
  expect_bad(R"({"presumptive":4,"reductive":4,"detail":4})");
  expect_bad(R"({"presumptive":5,"reductive":4,"detail":4,"coverage":4})");
  expect_bad(R"({"presumptive":4,"reductive":4,"detail":4,"coverage":4,"misc_subtraction":-1})");
  expect_bad(R"({"presumptive":3,"reductive":4,"detail":4,"coverage":4})");
  CHECK(parse_scorecard(R"({"presumptive":3,"reductive":4,"detail":4,"coverage":4})", false)
            .card.total == 15);
}

TEST_CASE("human override recomputes and keeps an audit trail") {
  auto card = make_scorecard(2, 4, 4, 3, 1, {{"coverage", "misses the text"}});
  REQUIRE(card.total == 12);
  auto next = apply_human_override(card, {{"coverage", 4}}, "The text is actually covered.");
  CHECK(next.total == 13);
  CHECK(next.scored_by == ScoredBy::human_override);
  REQUIRE(next.audit.size() == 1);
  CHECK(next.audit[0].coverage == 3);
  CHECK(next.audit[0].total == 12);
  CHECK(next.audit[0].scored_by == ScoredBy::llm);
  CHECK(next.audit[0].note == "The text is actually covered.");
  CHECK(card.audit.empty());

  auto twice = apply_human_override(next, {{"misc", 0}, {"A", 3}}, "second look");
  CHECK(twice.total == 15);
  CHECK(twice.audit.size() == 2);
  CHECK_FALSE(validate_scorecard(twice).has_value());
}

TEST_CASE("human override validation") {
  auto card = make_scorecard(4, 4, 4, 4);
  auto code_of = [&](const std::map<std::string, int>& c, const std::string& note) {
    try {
      apply_human_override(card, c, note);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::service_error;
  };
  CHECK(code_of({{"detail", 3}}, "  ") == ErrorCode::empty_note);
  CHECK(code_of({{"detail", 5}}, "n") == ErrorCode::category_out_of_range);
  CHECK(code_of({{"misc", -2}}, "n") == ErrorCode::negative_misc);
  CHECK(code_of({{"tone", 2}}, "n") == ErrorCode::invalid_value);
}

TEST_CASE("scorer calls the judge with one image and retries once on bad output") {
  Gateway gateway(testsupport::fast_options());
  auto judge = std::make_shared<MockProvider>();
  gateway.register_provider("mock", judge);
  MemoryBlobStore blobs;
  auto image = blobs.put_blob(testsupport::make_png(), "image/png");
  ScorerConfig cfg;
  cfg.judge_model_id = "mock/judge";
  RubricScorer scorer(gateway, blobs, exemplars(2), cfg);
  CHECK(scorer.exemplar_count() == 2);
  CHECK(scorer.exemplar_mode() == "text_only");

  int calls = 0;
  judge->set_responder([&](const ProviderRequest& r) {
    int images = 0;
    for (const auto& p : r.parts) images += p.is_image();
    CHECK(images == 1);
    ++calls;
    if (calls == 1) return std::string(R"({"presumptive":3,"reductive":4,"detail":4,"coverage":4})");
    return std::string(
        R"({"presumptive":3,"reductive":4,"detail":4,"coverage":4,"rationale":{"presumptive":"guesses a mood"}})");
  });
  auto card = scorer.score_description(image, "A sun.");
  CHECK(calls == 2);
  CHECK(card.total == 15);
  CHECK(card.scored_by == ScoredBy::llm);

  try {
    scorer.score_description(image, "   ");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_description);
  }
}

TEST_CASE("exemplar bundle loads from the sample manifest") {
  auto bundle = load_exemplar_bundle(ARTINSIGHT_SOURCE_DIR "/data/scorer_bundle/manifest.json");
  CHECK(bundle.size() == 5);
  for (const auto& ex : bundle) {
    CHECK_FALSE(validate_scorecard(ex.scorecard).has_value());
    CHECK_FALSE(ex.description_text.empty());
    CHECK(ex.image_ref.value.rfind("sha256:", 0) == 0);
  }
  CHECK_THROWS_AS(load_exemplar_bundle(ARTINSIGHT_SOURCE_DIR "/data/samples/manifest.json"), Error);
}
