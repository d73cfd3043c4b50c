#include <doctest.h>

#include <random>

#include "artinsight/domain.hpp"
#include "test_support.hpp"

using namespace artinsight;

namespace {

AnalysisResult sample_result(const std::string& tag = "") {
  AnalysisResult r;
  r.title = "Sunny day" + tag;
  r.descriptive = {DescriptionKind::descriptive, "A yellow sun." + tag, parse_timestamp("2026-01-02T03:04:05.678Z")};
  r.creative = {DescriptionKind::creative, "A beaming sun." + tag, parse_timestamp("2026-01-02T03:04:05.678Z")};
  r.questions = {"Q1" + tag, "Q2", "Q3"};
  r.model_id = "mock/m";
  r.prompt_revision = "sha256:abc";
  return r;
}

ArtworkSession ready_session() {
  ArtworkSession s;
  s.session_id = "s1";
  s.created_at = parse_timestamp("2026-05-01T10:00:00.000Z");
  s.image_ref = BlobRef{"sha256:" + std::string(64, 'a')};
  s.image_media_type = "image/png";
  s = append_revision(s, sample_result(), RevisionCause::initial);
  s.title = "Sunny day";
  s.status = SessionStatus::ready;
  return s;
}

}  // namespace

TEST_CASE("compute_total subtracts misc and floors at zero") {
  CHECK(compute_total(3, 4, 4, 4, 0) == 15);
  CHECK(compute_total(2, 4, 4, 4, 1) == 13);
  CHECK(compute_total(1, 3, 2, 3, 1) == 8);
  CHECK(compute_total(4, 4, 4, 4, 0) == 16);
  CHECK(compute_total(0, 0, 0, 0, 0) == 0);
  CHECK(compute_total(1, 0, 0, 0, 5) == 0);
}

TEST_CASE("compute_total rejects out-of-range input") {
  CHECK_THROWS_AS(compute_total(5, 4, 4, 4, 0), Error);
  try {
    compute_total(4, -1, 4, 4, 0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::category_out_of_range);
    CHECK(e.field() == "reductive");
  }
  try {
    compute_total(4, 4, 4, 4, -1);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::negative_misc);
  }
}

TEST_CASE("compute_total is bounded and monotone (randomized)") {
  std::mt19937 rng(1234);
  std::uniform_int_distribution<int> cat(0, 4), misc(0, 20);
  for (int i = 0; i < 5000; ++i) {
    int a = cat(rng), b = cat(rng), c = cat(rng), d = cat(rng), m = misc(rng);
    int t = compute_total(a, b, c, d, m);
    CHECK(t >= 0);
    CHECK(t <= kTotalMax);
    CHECK(t == std::max(0, a + b + c + d - m));
    if (a < 4) CHECK(compute_total(a + 1, b, c, d, m) >= t);
    if (m > 0) CHECK(compute_total(a, b, c, d, m - 1) >= t);
    CHECK(compute_total(a, b, c, d, m + 1) <= t);
  }
}

TEST_CASE("validate_scorecard") {
  CHECK_FALSE(validate_scorecard(make_scorecard(0, 0, 0, 0)).has_value());
  CHECK_FALSE(validate_scorecard(make_scorecard(4, 4, 4, 4, 2)).has_value());
  auto card = make_scorecard(4, 4, 4, 4);
  card.total = 15;
  auto issue = validate_scorecard(card);
  REQUIRE(issue);
  CHECK(issue->code == ErrorCode::total_mismatch);
  card = make_scorecard(4, 4, 4, 4);
  card.detail = 7;
  issue = validate_scorecard(card);
  REQUIRE(issue);
  CHECK(issue->code == ErrorCode::category_out_of_range);
  CHECK(issue->field == "detail");
}

TEST_CASE("category names and letters") {
  CHECK(category_name(RubricCategory::presumptive) == "presumptive");
  CHECK(category_letter(RubricCategory::coverage) == 'D');
  CHECK(category_from_name("detail") == RubricCategory::detail);
  CHECK(category_from_name("B") == RubricCategory::reductive);
  CHECK(category_from_name("b") == RubricCategory::reductive);
  CHECK_FALSE(category_from_name("misc").has_value());
  auto card = make_scorecard(1, 2, 3, 4);
  for (auto c : kRubricCategories) {
    card.set_score(c, 2);
    CHECK(card.score(c) == 2);
  }
}

TEST_CASE("timestamps round-trip with millisecond precision") {
  auto ts = parse_timestamp("2026-10-14T09:30:00.250Z");
  CHECK(format_timestamp(ts) == "2026-10-14T09:30:00.250Z");
  auto now = now_ms();
  CHECK(parse_timestamp(format_timestamp(now)) == now);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
  CHECK_THROWS_AS(parse_timestamp("2026-13-01T00:00:00.000Z"), Error);
  CHECK_THROWS_AS(parse_timestamp("2026-02-30T00:00:00.000Z"), Error);
}

TEST_CASE("validate_analysis requires title, both texts and three questions") {
  CHECK_FALSE(validate_analysis(sample_result()).has_value());
  auto r = sample_result();
  r.questions.pop_back();
  auto issue = validate_analysis(r);
  REQUIRE(issue);
  CHECK(issue->field == "questions");
  r = sample_result();
  r.questions[1] = "  ";
  issue = validate_analysis(r);
  REQUIRE(issue);
  CHECK(issue->field == "questions[1]");
  r = sample_result();
  r.title.clear();
  CHECK(validate_analysis(r)->field == "title");
}

TEST_CASE("lint_description flags list markers but never rejects") {
  CHECK(lint_description("Plain paragraph text.").empty());
  CHECK_FALSE(lint_description("Items:\n- one\n- two").empty());
  CHECK_FALSE(lint_description("1. first\n2. second").empty());
}

TEST_CASE("append_revision numbers consecutively and leaves the input untouched") {
  ArtworkSession s = ready_session();
  const ArtworkSession before = s;
  ArtworkSession next = append_revision(s, sample_result("-2"), RevisionCause::transcript_reprompt, "my dog");
  CHECK(s == before);
  REQUIRE(next.revisions.size() == 2);
  CHECK(next.revisions[1].number == 1);
  CHECK(next.revisions[1].cause == RevisionCause::transcript_reprompt);
  CHECK(next.revisions[1].transcript == std::optional<std::string>("my dog"));
  CHECK(next.revisions[0] == before.revisions[0]);
  CHECK(next.current == next.revisions[1].result);
  CHECK_FALSE(validate_session(next).has_value());
}

TEST_CASE("validate_session catches broken histories") {
  ArtworkSession s = ready_session();
  CHECK_FALSE(validate_session(s).has_value());

  auto gap = append_revision(s, sample_result(), RevisionCause::transcript_reprompt, "t");
  gap.revisions[1].number = 5;
  CHECK(validate_session(gap)->field == "revisions[1].number");

  auto second_initial = append_revision(s, sample_result(), RevisionCause::initial);
  CHECK(validate_session(second_initial)->field == "revisions[1].cause");

  auto stale = append_revision(s, sample_result("x"), RevisionCause::transcript_reprompt, "t");
  stale.current = s.current;
  CHECK(validate_session(stale)->field == "current");

  ArtworkSession empty_ready = s;
  empty_ready.revisions.clear();
  empty_ready.current.reset();
  CHECK(validate_session(empty_ready)->code == ErrorCode::invalid_state);

  ArtworkSession pending;
  pending.session_id = "p";
  pending.image_ref = s.image_ref;
  CHECK_FALSE(validate_session(pending).has_value());
}

TEST_CASE("session JSON round-trip") {
  ArtworkSession s = append_revision(ready_session(), sample_result("b"),
                                     RevisionCause::transcript_reprompt, "It is my cat");
  s.audio = AudioNote{BlobRef{"sha256:" + std::string(64, 'b')}, "audio/wav", 1200, "It is my cat",
                      "mock-transcriber"};
  s.store_version = 3;
  Json j = s;
  CHECK(j["schema_version"] == 1);
  CHECK(j["revisions"][1]["revision_number"] == 1);
  CHECK(j["revisions"][1]["cause"] == "transcript_reprompt");
  CHECK(j["status"] == "ready");
  CHECK_FALSE(j.contains("error"));
  CHECK(decode<ArtworkSession>(j) == s);
  CHECK(decode<ArtworkSession>(Json::parse(j.dump())) == s);
}

TEST_CASE("decoding rejects unknown enum values and missing fields") {
  Json j = ready_session();
  j["status"] = "done";
  CHECK_THROWS_AS(decode<ArtworkSession>(j), Error);
  j = ready_session();
  j.erase("image_ref");
  try {
    decode<ArtworkSession>(j);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
  }
}

TEST_CASE("scorecard and run JSON round-trip (randomized)") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> cat(0, 4), misc(0, 3);
  for (int i = 0; i < 200; ++i) {
    auto card = make_scorecard(cat(rng), cat(rng), cat(rng), cat(rng), misc(rng),
                               {{"detail", "missing the dog #" + std::to_string(i)}});
    if (i % 3 == 0) card.judge_reported_total = 16;
    CHECK(decode<RubricScorecard>(Json(card)) == card);
  }

  ComparisonRun run;
  run.run_id = "r1";
  run.models = {"m1", "m2"};
  run.dataset = {{"img1", BlobRef{"sha256:" + std::string(64, 'c')}, "a.png", std::nullopt}};
  run.cells.push_back({"img1", run.dataset[0].image_ref, "m1", CellStatus::scored, "text",
                       make_scorecard(4, 4, 4, 4), std::nullopt, std::nullopt});
  run.cells.push_back({"img1", run.dataset[0].image_ref, "m2", CellStatus::failed, "",
                       std::nullopt, "timeout_exhausted", "gave up"});
  run.aggregates = {{"m1", 16.0}};
  run.metadata = {"sha256:p", "sha256:e", "mock/judge", 5, "text_only"};
  CHECK_FALSE(validate_run(run).has_value());
  CHECK(decode<ComparisonRun>(Json::parse(Json(run).dump())) == run);
  CHECK(run.find_cell("img1", "m2")->status == CellStatus::failed);
  CHECK(run.find_cell("img1", "m3") == nullptr);
}

TEST_CASE("error codes have stable names") {
  CHECK(to_string(ErrorCode::timeout_exhausted) == "timeout_exhausted");
  CHECK(to_string(ErrorCode::empty_transcript) == "empty_transcript");
  Error e(ErrorCode::conflict, "stale", "store_version");
  CHECK(std::string(e.what()) == "conflict: stale");
  CHECK(e.field() == "store_version");
}
