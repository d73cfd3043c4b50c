#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "artinsight/api_service.hpp"
#include "artinsight/mock_responses.hpp"
#include "test_support.hpp"

using namespace artinsight;
using namespace std::chrono_literals;

namespace {

std::string as_string(std::span<const std::uint8_t> b) { return {b.begin(), b.end()}; }

struct Server {
  testsupport::TempDir dir;
  SessionStore store{dir.path()};
  Gateway gateway{testsupport::fast_options()};
  std::shared_ptr<MockProvider> provider = std::make_shared<MockProvider>();
  std::shared_ptr<MockTranscriber> transcriber = std::make_shared<MockTranscriber>();
  EngineConfig engine_config = [] {
    EngineConfig c;
    c.default_model_id = "mock/describer";
    c.image_size_limit = 64 * 1024;
    return c;
  }();
  DescriptionEngine engine{gateway, store, PromptBundle::canonical(), engine_config};
  TranscriptionService transcription{transcriber, {}};
  std::unique_ptr<ApiService> api;
  std::unique_ptr<httplib::Client> client;

  Server() {
    ProviderConfig cfg;
    cfg.retry.max_attempts = 1;
    gateway.register_provider("mock", provider, cfg);
    provider->set_responder(synthetic_responder());
    transcriber->set_fallback("This is my dog Biscuit playing with a red ball.");
    ServiceConfig sc;
    sc.port = 0;
    sc.workers = 2;
    api = std::make_unique<ApiService>(store, engine, transcription, sc);
    int port = api->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(10, 0);
  }
  ~Server() { api->stop(); }

  httplib::Result upload_image(std::span<const std::uint8_t> bytes, const std::string& model = "") {
    httplib::MultipartFormDataItems items = {{"image", as_string(bytes), "art.png", "image/png"}};
    if (!model.empty()) items.push_back({"model_id", model, "", ""});
    return client->Post("/api/sessions", items);
  }

  Json get_json(const std::string& path, int expect = 200) {
    auto r = client->Get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return Json::parse(r->body);
  }

  Json wait_ready(const std::string& id) {
    api->wait_idle();
    return get_json("/api/sessions/" + id);
  }

  std::string create_ready() {
    static std::atomic<std::uint64_t> salt{1000};
    auto r = upload_image(testsupport::make_png(4, 4, salt++));
    REQUIRE(r);
    REQUIRE(r->status == 202);
    std::string id = Json::parse(r->body)["session_id"];
    CHECK(wait_ready(id)["status"] == "ready");
    return id;
  }

  httplib::Result upload_audio(const std::string& id, std::span<const std::uint8_t> bytes, const std::string& type = "audio/wav") {
    httplib::MultipartFormDataItems items = {{"audio", as_string(bytes), "note", type}};
    return client->Post("/api/sessions/" + id + "/audio", items);
  }
};

}  // namespace

TEST_CASE("api: health and CORS") {
  Server s;
  auto r = s.client->Get("/api/health");
  REQUIRE(r);
  CHECK(r->status == 200);
  auto j = Json::parse(r->body);
  CHECK(j["status"] == "ok");
  CHECK(j["prompt_revision"] == PromptBundle::canonical().revision);
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");

  auto pre = s.client->Options("/api/sessions");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->has_header("Access-Control-Allow-Methods"));
}

TEST_CASE("api: upload answers 202 then the session becomes ready") {
  Server s;
  auto r = s.upload_image(testsupport::make_png());
  REQUIRE(r);
  CHECK(r->status == 202);
  auto body = Json::parse(r->body);
  std::string id = body["session_id"];
  CHECK(r->get_header_value("Location") == "/api/sessions/" + id);

  auto session = s.wait_ready(id);
  CHECK(session["status"] == "ready");
  CHECK(session["current"]["questions"].size() == 3);
  CHECK(session["revisions"].size() == 1);
  CHECK(session["current"]["model_id"] == "mock/describer");

  auto job = s.get_json("/api/jobs/" + body["job_id"].get<std::string>());
  CHECK(job["state"] == "succeeded");
  s.get_json("/api/jobs/nope", 404);

  // The stored image is served back byte for byte.
  auto blob = s.client->Get("/api/blobs/" + session["image_ref"].get<std::string>());
  REQUIRE(blob);
  CHECK(blob->status == 200);
  CHECK(blob->body == as_string(testsupport::make_png()));
}

TEST_CASE("api: explicit model id is used") {
  Server s;
  auto r = s.upload_image(testsupport::make_png(), "mock/other");
  REQUIRE(r);
  std::string id = Json::parse(r->body)["session_id"];
  CHECK(s.wait_ready(id)["current"]["model_id"] == "mock/other");
}

TEST_CASE("api: upload validation") {
  Server s;
  auto bad = s.upload_image(as_bytes("definitely not an image"));
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(Json::parse(bad->body)["error"]["code"] == "bad_image");

  auto big = s.upload_image(testsupport::make_png(4, 4, 0, 70 * 1024));
  REQUIRE(big);
  CHECK(big->status == 413);

  auto none = s.client->Post("/api/sessions", httplib::MultipartFormDataItems{});
  REQUIRE(none);
  CHECK(none->status == 400);
  CHECK(s.store.session_count() == 0);
}

TEST_CASE("api: failed description marks the session failed") {
  Server s;
  s.provider->fail_when([](const ProviderRequest&) { return true; }, ProviderFailure::Kind::auth);
  auto r = s.upload_image(testsupport::make_png());
  std::string id = Json::parse(r->body)["session_id"];
  auto session = s.wait_ready(id);
  CHECK(session["status"] == "failed");
}

TEST_CASE("api: unknown sessions are 404") {
  Server s;
  s.get_json("/api/sessions/missing", 404);
  auto a = s.upload_audio("missing", testsupport::make_wav(500));
  REQUIRE(a);
  CHECK(a->status == 404);
  auto rp = s.client->Post("/api/sessions/missing/reprompt", "", "application/json");
  REQUIRE(rp);
  CHECK(rp->status == 404);
}

TEST_CASE("api: list is newest first and paged") {
  Server s;
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    auto r = s.upload_image(testsupport::make_png(4, 4, static_cast<std::uint64_t>(i)));
    ids.push_back(Json::parse(r->body)["session_id"]);
    std::this_thread::sleep_for(3ms);
  }
  s.api->wait_idle();
  auto list = s.get_json("/api/sessions?page=0&page_size=2");
  CHECK(list["total"] == 3);
  REQUIRE(list["sessions"].size() == 2);
  CHECK(list["sessions"][0]["session_id"] == ids[2]);
  CHECK(list["sessions"][1]["session_id"] == ids[1]);
  auto page1 = s.get_json("/api/sessions?page=1&page_size=2");
  CHECK(page1["sessions"][0]["session_id"] == ids[0]);
}

TEST_CASE("api: audio upload transcribes or rejects") {
  Server s;
  std::string id = s.create_ready();

  auto bad = s.upload_audio(id, as_bytes("this is text"), "text/plain");
  REQUIRE(bad);
  CHECK(bad->status == 415);

  s.transcriber->set_fallback("");
  auto silent = s.upload_audio(id, testsupport::make_wav(700));
  REQUIRE(silent);
  CHECK(silent->status == 422);

  s.transcriber->set_fallback("It's my dog Biscuit.");
  auto ok = s.upload_audio(id, testsupport::make_wav(1500));
  REQUIRE(ok);
  CHECK(ok->status == 200);
  auto body = Json::parse(ok->body);
  CHECK(body["transcript"] == "It's my dog Biscuit.");
  CHECK(body["audio"]["duration_ms"] == 1500);
  auto session = s.get_json("/api/sessions/" + id);
  CHECK(session["audio"]["transcript"] == "It's my dog Biscuit.");
  CHECK(session["revisions"].size() == 1);
}

TEST_CASE("api: reprompt needs a transcript, then appends a revision") {
  Server s;
  std::string id = s.create_ready();
  auto early = s.client->Post("/api/sessions/" + id + "/reprompt", "", "application/json");
  REQUIRE(early);
  CHECK(early->status == 409);

  REQUIRE(s.upload_audio(id, testsupport::make_wav(900))->status == 200);
  auto before = s.get_json("/api/sessions/" + id);
  auto r = s.client->Post("/api/sessions/" + id + "/reprompt", "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 202);
  auto after = s.wait_ready(id);
  REQUIRE(after["revisions"].size() == 2);
  CHECK(after["revisions"][0] == before["revisions"][0]);
  CHECK(after["revisions"][1]["cause"] == "transcript_reprompt");
  CHECK(after["current"]["questions"].size() == 3);
  CHECK(after["current"]["descriptive"]["text"].get<std::string>().find("Biscuit") != std::string::npos);

  // An explicit transcript in the body wins over the stored one.
  auto typed = s.client->Post("/api/sessions/" + id + "/reprompt", R"({"transcript": "A purple dragon"})",
                              "application/json");
  REQUIRE(typed);
  CHECK(typed->status == 202);
  CHECK(s.wait_ready(id)["revisions"][2]["transcript"] == "A purple dragon");

  auto junk = s.client->Post("/api/sessions/" + id + "/reprompt", "not json", "application/json");
  REQUIRE(junk);
  CHECK(junk->status == 400);
}

TEST_CASE("api: a second reprompt while one is in flight is rejected") {
  Server s;
  std::string id = s.create_ready();
  REQUIRE(s.upload_audio(id, testsupport::make_wav(900))->status == 200);
  s.provider->set_latency(400);
  auto first = s.client->Post("/api/sessions/" + id + "/reprompt", "", "application/json");
  auto second = s.client->Post("/api/sessions/" + id + "/reprompt", "", "application/json");
  REQUIRE(first);
  REQUIRE(second);
  CHECK(first->status == 202);
  CHECK(second->status == 409);
  CHECK(Json::parse(second->body)["error"]["code"] == "conflict");
  auto after = s.wait_ready(id);
  CHECK(after["revisions"].size() == 2);
  s.provider->set_latency(0);
  auto third = s.client->Post("/api/sessions/" + id + "/reprompt", "", "application/json");
  REQUIRE(third);
  CHECK(third->status == 202);
}

TEST_CASE("api: delete purges the session") {
  Server s;
  std::string id = s.create_ready();
  auto r = s.client->Delete("/api/sessions/" + id + "?erase_blobs=true");
  REQUIRE(r);
  CHECK(r->status == 204);
  s.get_json("/api/sessions/" + id, 404);
}

TEST_CASE("error codes map to HTTP statuses") {
  CHECK(http_status_for(ErrorCode::not_found) == 404);
  CHECK(http_status_for(ErrorCode::conflict) == 409);
  CHECK(http_status_for(ErrorCode::invalid_state) == 409);
  CHECK(http_status_for(ErrorCode::image_too_large) == 413);
  CHECK(http_status_for(ErrorCode::unsupported_format) == 415);
  CHECK(http_status_for(ErrorCode::empty_transcript) == 422);
  CHECK(http_status_for(ErrorCode::bad_image) == 400);
  CHECK(http_status_for(ErrorCode::timeout_exhausted) == 502);
}
