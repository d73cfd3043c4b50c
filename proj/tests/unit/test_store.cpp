#include <doctest.h>

#include <fstream>
#include <thread>

#include "artinsight/session_store.hpp"
#include "test_support.hpp"

using namespace artinsight;
namespace fs = std::filesystem;

namespace {

AnalysisResult result(const std::string& tag) {
  AnalysisResult r;
  r.title = "Title " + tag;
  r.descriptive = {DescriptionKind::descriptive, "Descriptive " + tag, now_ms()};
  r.creative = {DescriptionKind::creative, "Creative " + tag, now_ms()};
  r.questions = {"q1", "q2", "q3"};
  r.model_id = "mock/m";
  r.prompt_revision = "sha256:p";
  return r;
}

ArtworkSession new_session(SessionStore& store, std::int64_t created_ms, std::uint64_t salt = 0) {
  ArtworkSession s;
  s.session_id = new_session_id();
  s.created_at = Timestamp(std::chrono::milliseconds(created_ms));
  s.image_ref = store.put_blob(testsupport::make_png(4, 4, salt), "image/png");
  s.image_media_type = "image/png";
  return s;
}

}  // namespace

TEST_CASE("blobs are content addressed, idempotent and verified") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  auto png = testsupport::make_png();
  auto a = store.put_blob(png, "image/png");
  auto b = store.put_blob(png, "image/png");
  CHECK(a == b);
  CHECK(a == blob_ref_for(png));
  CHECK(store.has_blob(a));
  Blob got = store.get_blob(a);
  CHECK(got.bytes == png);
  CHECK(got.media_type == "image/png");

  try {
    store.get_blob(BlobRef{"sha256:" + std::string(64, '0')});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }
  CHECK_THROWS_AS(store.put_blob({}, "image/png"), Error);

  // Corrupt the stored content: reads must detect it.
  std::string hex = a.value.substr(7);
  fs::path path = dir.path() / "blobs" / "sha256" / hex.substr(0, 2) / hex;
  REQUIRE(fs::exists(path));
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "garbage";
  }
  CHECK_THROWS_AS(store.get_blob(a), Error);
}

TEST_CASE("blob size limit") {
  testsupport::TempDir dir;
  StoreOptions opts;
  opts.blob_size_limit = 100;
  SessionStore store(dir.path(), opts);
  try {
    store.put_blob(testsupport::make_png(4, 4, 0, 200), "image/png");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::too_large);
  }
}

TEST_CASE("save and load sessions with optimistic versions") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  auto s = new_session(store, 1000);
  auto saved = store.save_session(s);
  CHECK(saved.store_version == 1);
  CHECK(store.load_session(s.session_id) == saved);

  auto ready = append_revision(saved, result("0"), RevisionCause::initial);
  ready.status = SessionStatus::ready;
  auto v2 = store.save_session(ready);
  CHECK(v2.store_version == 2);

  // A writer holding version 1 must be rejected.
  auto stale = append_revision(saved, result("x"), RevisionCause::initial);
  stale.status = SessionStatus::ready;
  try {
    store.save_session(stale);
    FAIL("expected conflict");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::conflict);
  }
  CHECK(store.load_session(s.session_id) == v2);

  // Creating a session that already exists is also a conflict.
  CHECK_THROWS_AS(store.save_session(s), Error);
}

TEST_CASE("invalid sessions are never written") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  auto s = new_session(store, 1);
  s.status = SessionStatus::ready;  // ready without revisions
  CHECK_THROWS_AS(store.save_session(s), Error);
  CHECK_FALSE(store.has_session(s.session_id));
  try {
    store.load_session("does-not-exist");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }
  CHECK_THROWS_AS(store.load_session("../etc/passwd"), Error);
}

TEST_CASE("listing is newest first with id tie-break and paging") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  std::vector<ArtworkSession> all;
  for (int i = 0; i < 7; ++i) {
    auto s = new_session(store, 1000 * (i % 4), static_cast<std::uint64_t>(i));
    all.push_back(store.save_session(s));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.session_id < b.session_id;
  });
  auto page0 = store.list_sessions(0, 4);
  auto page1 = store.list_sessions(1, 4);
  REQUIRE(page0.size() == 4);
  REQUIRE(page1.size() == 3);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto& got = i < 4 ? page0[i] : page1[i - 4];
    CHECK(got.session_id == all[i].session_id);
  }
  CHECK(store.list_sessions(5, 4).empty());
  CHECK(store.session_count() == 7);
}

TEST_CASE("index is rebuilt when missing or stale") {
  testsupport::TempDir dir;
  std::string id;
  {
    SessionStore store(dir.path());
    id = store.save_session(new_session(store, 5)).session_id;
  }
  fs::remove(dir.path() / "index.json");
  SessionStore reopened(dir.path());
  auto list = reopened.list_sessions();
  REQUIRE(list.size() == 1);
  CHECK(list[0].session_id == id);
}

TEST_CASE("store survives reopen and rejects unknown schema versions") {
  testsupport::TempDir dir;
  {
    SessionStore store(dir.path());
    store.save_session(new_session(store, 5));
  }
  CHECK_NOTHROW(SessionStore(dir.path()));
  write_file_atomic(dir.path() / "store.json", R"({"schema_version": 99})");
  CHECK_THROWS_AS(SessionStore(dir.path()), Error);
}

TEST_CASE("purge removes the session and only unshared blobs") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  auto a = new_session(store, 1, 1);
  auto b = new_session(store, 2, 1);  // same image bytes as a
  auto c = new_session(store, 3, 2);
  store.save_session(a);
  store.save_session(b);
  store.save_session(c);
  store.purge_session(a.session_id, true);
  CHECK_FALSE(store.has_session(a.session_id));
  CHECK(store.has_blob(a.image_ref));  // still used by b
  store.purge_session(c.session_id, true);
  CHECK_FALSE(store.has_blob(c.image_ref));
  CHECK(store.session_count() == 1);
  CHECK_THROWS_AS(store.purge_session(a.session_id), Error);
}

TEST_CASE("runs are stored by id") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  ComparisonRun run;
  run.run_id = "run-abc";
  run.models = {"m"};
  run.metadata.exemplar_mode = "text_only";
  store.save_run(run);
  CHECK(store.load_run("run-abc") == run);
  CHECK(store.list_runs() == std::vector<std::string>{"run-abc"});
  CHECK_THROWS_AS(store.load_run("nope"), Error);
}

TEST_CASE("concurrent writers to one session: exactly one wins per version") {
  testsupport::TempDir dir;
  SessionStore store(dir.path());
  auto base = store.save_session(new_session(store, 1));
  base = append_revision(base, result("0"), RevisionCause::initial);
  base.status = SessionStatus::ready;
  base = store.save_session(base);

  std::atomic<int> wins{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      auto mine = append_revision(base, result(std::to_string(t)), RevisionCause::transcript_reprompt,
                                  "t" + std::to_string(t));
      try {
        store.save_session(mine);
        ++wins;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::conflict) ++conflicts;
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(wins.load() == 1);
  CHECK(conflicts.load() == 7);
  auto final_state = store.load_session(base.session_id);
  CHECK(final_state.revisions.size() == 2);
  CHECK(final_state.store_version == base.store_version + 1);
}

TEST_CASE("write_file_atomic replaces contents") {
  testsupport::TempDir dir;
  auto p = dir.path() / "x.json";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  CHECK(read_file_bytes(p) == "two");
  int temps = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) temps += e.path() != p;
  CHECK(temps == 0);
}
