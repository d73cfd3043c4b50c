#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "artinsight/gateway.hpp"
#include "artinsight/mock_responses.hpp"
#include "test_support.hpp"

using namespace artinsight;
using Kind = ProviderFailure::Kind;

namespace {

ProviderRequest text_request(const std::string& model, const std::string& text = "hello") {
  ProviderRequest r;
  r.model_id = model;
  r.parts = {{Role::system, std::string("be brief")}, {Role::user, text}};
  return r;
}

std::shared_ptr<MockProvider> echo_provider() {
  auto p = std::make_shared<MockProvider>();
  p->set_responder([](const ProviderRequest& r) { return "echo:" + r.model_id; });
  return p;
}

RetryPolicy quick_policy(int attempts) {
  RetryPolicy p;
  p.max_attempts = attempts;
  p.base_backoff = std::chrono::milliseconds(100);
  p.jitter = 0.0;
  return p;
}

class FakeTransport : public HttpTransport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    last = request;
    return response;
  }
  HttpRequest last;
  HttpResponse response{200, ""};
};

}  // namespace

TEST_CASE("request hash covers content but not timeout") {
  auto a = text_request("openai/gpt-4o");
  auto b = a;
  b.timeout_ms = 5;
  CHECK(request_hash(a) == request_hash(b));
  b.temperature = 0.7;
  CHECK(request_hash(a) != request_hash(b));
  auto c = a;
  c.parts[1].content = std::string("hello!");
  CHECK(request_hash(a) != request_hash(c));
  CHECK(request_hash(a).size() == 64);
}

TEST_CASE("validate_request allows at most one image") {
  auto r = text_request("m/x");
  ImagePayload img{"image/png", "AAAA"};
  r.parts.push_back({Role::user, img});
  CHECK_FALSE(validate_request(r).has_value());
  r.parts.push_back({Role::user, img});
  CHECK(validate_request(r).has_value());
  auto t = text_request("m/x");
  t.timeout_ms = 0;
  CHECK(validate_request(t).has_value());
}

TEST_CASE("status classification") {
  CHECK(ProviderFailure::classify_status(401) == Kind::auth);
  CHECK(ProviderFailure::classify_status(403) == Kind::auth);
  CHECK(ProviderFailure::classify_status(413) == Kind::payload_too_large);
  CHECK(ProviderFailure::classify_status(429) == Kind::transient);
  CHECK(ProviderFailure::classify_status(503) == Kind::transient);
  CHECK(ProviderFailure::classify_status(408) == Kind::transient);
  CHECK(ProviderFailure::classify_status(400) == Kind::terminal);
}

TEST_CASE("routing picks the longest prefix and strips it") {
  Gateway gw(testsupport::fast_options());
  auto general = echo_provider();
  auto special = echo_provider();
  gw.register_provider("openai", general);
  ProviderConfig cfg;
  cfg.model_prefixes = {"openai/gpt-4o-"};
  gw.register_provider("special", special, cfg);
  CHECK(gw.send(text_request("openai/gpt-4o")).raw_text == "echo:gpt-4o");
  CHECK(gw.send(text_request("openai/gpt-4o-mini")).raw_text == "echo:mini");
  CHECK(gw.route("openai/gpt-4o-mini") == std::optional<std::string>("special"));
  CHECK_FALSE(gw.route("anthropic/claude").has_value());
  try {
    gw.send(text_request("anthropic/claude"));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::provider_error);
  }
  auto resp = gw.send(text_request("openai/gpt-4o"));
  CHECK(resp.model_id == "openai/gpt-4o");
  CHECK(resp.latency_ms >= 0);
}

TEST_CASE("duplicate provider ids and prefixes are rejected") {
  Gateway gw;
  gw.register_provider("openai", echo_provider());
  try {
    gw.register_provider("openai", echo_provider());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::duplicate_provider);
  }
  ProviderConfig cfg;
  cfg.model_prefixes = {"openai/"};
  CHECK_THROWS_AS(gw.register_provider("other", echo_provider(), cfg), Error);
}

TEST_CASE("transient failures retry with exponential backoff up to the budget") {
  std::vector<std::chrono::milliseconds> slept;
  Gateway gw(testsupport::fast_options(&slept));
  auto p = echo_provider();
  ProviderConfig cfg;
  cfg.retry = quick_policy(4);
  gw.register_provider("m", p, cfg);

  p->inject_faults({Kind::transient, Kind::timeout});
  CHECK(gw.send(text_request("m/a")).raw_text == "echo:a");
  CHECK(p->call_count() == 3);
  REQUIRE(slept.size() == 2);
  CHECK(slept[0].count() == 100);
  CHECK(slept[1].count() == 200);

  p->clear_calls();
  slept.clear();
  p->inject_faults({Kind::transient, Kind::transient, Kind::transient, Kind::transient, Kind::transient});
  try {
    gw.send(text_request("m/a"));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::timeout_exhausted);
  }
  CHECK(p->call_count() == 4);
  CHECK(slept.size() == 3);
}

TEST_CASE("non-retryable failures short-circuit") {
  const std::pair<Kind, ErrorCode> cases[] = {{Kind::auth, ErrorCode::auth_error},
                                              {Kind::payload_too_large, ErrorCode::payload_too_large},
                                              {Kind::terminal, ErrorCode::provider_error}};
  for (const auto& [kind, code] : cases) {
    Gateway gw(testsupport::fast_options());
    auto p = echo_provider();
    gw.register_provider("m", p);
    p->inject_faults({kind});
    try {
      gw.send(text_request("m/a"));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
    CHECK(p->call_count() == 1);
  }
}

TEST_CASE("backoff jitter stays within bounds") {
  Gateway gw(testsupport::fast_options());
  RetryPolicy p;
  p.base_backoff = std::chrono::milliseconds(1000);
  p.multiplier = 2.0;
  p.jitter = 0.2;
  for (int i = 1; i <= 4; ++i) {
    const double nominal = 1000.0 * std::pow(2.0, i - 1);
    for (int k = 0; k < 50; ++k) {
      auto d = gw.backoff_delay(p, i).count();
      CHECK(d >= std::floor(nominal * 0.8));
      CHECK(d <= std::ceil(nominal * 1.2));
    }
  }
}

TEST_CASE("per-provider concurrency cap is honored") {
  Gateway gw(testsupport::fast_options());
  std::atomic<int> current{0}, peak{0};
  auto p = std::make_shared<MockProvider>();
  p->set_responder([&](const ProviderRequest&) {
    int now = ++current;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --current;
    return std::string("ok");
  });
  ProviderConfig cfg;
  cfg.max_concurrent = 2;
  gw.register_provider("m", p, cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 12; ++i) {
    threads.emplace_back([&gw, i] { gw.send(text_request("m/x", std::to_string(i))); });
  }
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 2);
  CHECK(p->call_count() == 12);
}

TEST_CASE("mock provider scripts by request hash") {
  MockProvider p;
  auto r = text_request("x");
  p.script(request_hash(r), "scripted");
  CHECK(p.complete(r).raw_text == "scripted");
  CHECK_THROWS_AS(p.complete(text_request("x", "other")), ProviderFailure);
  p.fail_when([](const ProviderRequest& q) { return q.model_id == "bad"; }, Kind::auth);
  try {
    p.complete(text_request("bad"));
    FAIL("expected throw");
  } catch (const ProviderFailure& f) {
    CHECK(f.kind() == Kind::auth);
  }
  CHECK(p.calls().size() == 3);
  CHECK(p.calls()[0].request_hash == request_hash(r));
}

TEST_CASE("record then replay returns identical text without the live provider") {
  testsupport::TempDir dir;
  auto live = echo_provider();
  {
    Gateway gw(testsupport::fast_options());
    gw.register_provider("m", live);
    gw.wrap_providers([&](const std::string& id, std::shared_ptr<Provider> inner) {
      return std::make_shared<RecordingProvider>(id, inner, dir.path());
    });
    CHECK(gw.send(text_request("m/a")).raw_text == "echo:a");
  }
  CHECK(live->call_count() == 1);
  Gateway replay(testsupport::fast_options());
  replay.register_provider("m", echo_provider());
  replay.wrap_providers([&](const std::string& id, std::shared_ptr<Provider>) {
    return std::make_shared<ReplayProvider>(id, dir.path());
  });
  CHECK(replay.send(text_request("m/a")).raw_text == "echo:a");
  try {
    replay.send(text_request("m/unrecorded"));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::provider_error);
  }
  auto key = exchange_key("m", [] {
    auto r = text_request("m/a");
    r.model_id = "a";
    return r;
  }());
  CHECK(std::filesystem::exists(dir.path() / (key + ".json")));
}

TEST_CASE("OpenAI-style body carries the image as a data URL") {
  ProviderRequest r = text_request("gpt-4o");
  r.parts.push_back({Role::user, ImagePayload{"image/png", "QUJD"}});
  Json body = OpenAiChatProvider::build_body(r);
  CHECK(body["model"] == "gpt-4o");
  CHECK(body["messages"][0]["role"] == "system");
  const std::string dumped = body.dump();
  CHECK(dumped.find("data:image/png;base64,QUJD") != std::string::npos);

  auto resp = OpenAiChatProvider::parse_body(
      R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})");
  CHECK(resp.raw_text == "hi");
  REQUIRE(resp.token_usage);
  CHECK(resp.token_usage->input_tokens == 3);
  CHECK_THROWS(OpenAiChatProvider::parse_body("{}"));
}

TEST_CASE("Anthropic body separates the system prompt") {
  ProviderRequest r = text_request("claude-3-5-sonnet");
  r.parts.push_back({Role::user, ImagePayload{"image/jpeg", "QUJD"}});
  Json body = AnthropicProvider::build_body(r);
  CHECK(body["system"] == "be brief");
  CHECK(body["max_tokens"] == 2048);
  auto resp = AnthropicProvider::parse_body(
      R"({"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]})");
  CHECK(resp.raw_text == "ab");
}

TEST_CASE("HTTP providers attach credentials from the environment and map status codes") {
  auto transport = std::make_shared<FakeTransport>();
  ::setenv("ARTINSIGHT_TEST_KEY", "secret-value", 1);
  OpenAiChatProvider p("https://example.invalid/v1", ApiCredentials{"ARTINSIGHT_TEST_KEY"}, transport);
  transport->response = {200, R"({"choices":[{"message":{"content":"ok"}}]})"};
  CHECK(p.complete(text_request("gpt-4o")).raw_text == "ok");
  CHECK(transport->last.url == "https://example.invalid/v1/chat/completions");
  bool has_auth = false;
  for (const auto& [k, v] : transport->last.headers) {
    if (k == "Authorization") has_auth = v == "Bearer secret-value";
  }
  CHECK(has_auth);

  transport->response = {429, "slow down"};
  try {
    p.complete(text_request("gpt-4o"));
    FAIL("expected throw");
  } catch (const ProviderFailure& f) {
    CHECK(f.kind() == Kind::transient);
    CHECK(f.http_status() == 429);
  }

  ::unsetenv("ARTINSIGHT_TEST_KEY");
  try {
    p.complete(text_request("gpt-4o"));
    FAIL("expected throw");
  } catch (const ProviderFailure& f) {
    CHECK(f.kind() == Kind::auth);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::auth_error);
  }
}

TEST_CASE("synthetic responder answers describe and judge prompts") {
  auto respond = synthetic_responder();
  ProviderRequest judge = text_request("judge");
  judge.parts[0].content = std::string("You are the LLM Scorer. ...");
  CHECK(is_judge_request(judge));
  Json card = Json::parse(respond(judge));
  CHECK(card["total"] == 16);
  Json analysis = Json::parse(respond(text_request("describer")));
  CHECK(analysis["questions"].size() == 3);
  CHECK(respond(text_request("describer")) == respond(text_request("describer")));
}
