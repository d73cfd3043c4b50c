#include <doctest.h>

#include "artinsight/config.hpp"
#include "test_support.hpp"

using namespace artinsight;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const Json& doc, std::string* field = nullptr) {
  try {
    config_from_json(doc);
  } catch (const Error& e) {
    if (field) *field = e.field();
    return e.code();
  }
  return ErrorCode::service_error;
}

}  // namespace

TEST_CASE("default config names key variables, never keys") {
  auto c = default_config();
  REQUIRE(c.providers.size() == 4);
  CHECK(c.providers[0].api_key_env == "OPENAI_API_KEY");
  CHECK(c.providers[1].api_key_env == "ANTHROPIC_API_KEY");
  CHECK(c.providers[2].api_key_env == "GEMINI_API_KEY");
  CHECK(c.providers[2].kind == ProviderKind::gemini);
  CHECK(c.providers[3].kind == ProviderKind::mock);
  CHECK(c.service.host == "127.0.0.1");

  auto m = mock_config();
  CHECK(m.providers.size() == 1);
  CHECK(m.engine.default_model_id.rfind("mock/", 0) == 0);
  CHECK(m.scorer.judge_model_id.rfind("mock/", 0) == 0);
}

TEST_CASE("config_from_json overrides selected fields") {
  Json doc = Json::parse(R"({
    "providers": [{"id": "openai", "max_concurrent": 2, "retry": {"max_attempts": 5, "base_backoff_ms": 50}},
                  {"id": "local", "kind": "openai", "base_url": "http://localhost:9000/v1", "api_key_env": "LOCAL_KEY"}],
    "engine": {"default_model_id": "openai/gpt-4o", "prompt_dir": "prompts"},
    "scorer": {"exemplar_bundle": "/abs/bundle.json"},
    "store": {"root": "data"},
    "service": {"port": 9090, "workers": 2}
  })");
  auto c = config_from_json(doc, "/base");
  REQUIRE(c.providers.size() == 2);
  CHECK(c.providers[0].base_url == "https://api.openai.com/v1");
  CHECK(c.providers[0].routing.max_concurrent == 2);
  CHECK(c.providers[0].routing.retry.max_attempts == 5);
  CHECK(c.providers[0].routing.retry.base_backoff == std::chrono::milliseconds(50));
  CHECK(c.providers[1].kind == ProviderKind::openai);
  CHECK(c.providers[1].api_key_env == "LOCAL_KEY");
  CHECK(c.engine.default_model_id == "openai/gpt-4o");
  CHECK(c.prompt_dir == std::optional<fs::path>(fs::path("/base/prompts")));
  CHECK(c.scorer_bundle == std::optional<fs::path>(fs::path("/abs/bundle.json")));
  CHECK(c.store_root == fs::path("/base/data"));
  CHECK(c.service.port == 9090);
  CHECK(c.service.host == "127.0.0.1");
}

TEST_CASE("config rejects inline secrets and bad values") {
  std::string field;
  CHECK(code_of(Json::parse(R"({"providers": [{"id": "openai", "api_key": "sk-123"}]})"), &field) ==
        ErrorCode::invalid_value);
  CHECK(field == "providers[0].api_key");
  CHECK(code_of(Json::parse(R"({"transcription": {"api_key": "sk"}})")) == ErrorCode::invalid_value);
  CHECK(code_of(Json::parse(R"({"providers": [{"id": "mock"}, {"id": "mock"}]})")) ==
        ErrorCode::duplicate_provider);
  CHECK(code_of(Json::parse(R"({"providers": [{"id": "x", "kind": "llama"}]})"), &field) ==
        ErrorCode::invalid_value);
  CHECK(field == "providers[0].kind");
  CHECK(code_of(Json::parse(R"({"service": {"port": 70000}})"), &field) == ErrorCode::invalid_value);
  CHECK(field == "service.port");
  CHECK(code_of(Json::parse(R"({"engine": {"temperature": "hot"}})"), &field) == ErrorCode::invalid_value);
  CHECK(field == "engine.temperature");
  CHECK(code_of(Json::parse(R"({"transcription": {"mode": "telepathy"}})")) == ErrorCode::invalid_value);
  CHECK(code_of(Json::parse("[]")) == ErrorCode::invalid_value);
}

TEST_CASE("shipped configs load") {
  auto mock = load_config(ARTINSIGHT_SOURCE_DIR "/data/config/mock.json");
  CHECK(mock.providers.size() == 1);
  CHECK(mock.transcription.config.mode == TranscriberMode::mock);
  REQUIRE(mock.scorer_bundle.has_value());
  CHECK(fs::exists(*mock.scorer_bundle));

  auto real = load_config(ARTINSIGHT_SOURCE_DIR "/data/config/example.json");
  CHECK(real.transcription.config.mode == TranscriberMode::external_service);
  CHECK(real.providers.size() == 4);
  CHECK(real.store_root == fs::path("/var/lib/artinsight"));

  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("registered mock providers answer offline") {
  Gateway gateway(testsupport::fast_options());
  register_providers(gateway, mock_config().providers);
  ProviderRequest req;
  req.model_id = "mock/describer";
  req.parts.push_back(MessagePart{Role::system, std::string("system")});
  req.parts.push_back(MessagePart{Role::user, std::string("describe")});
  auto res = gateway.send(req);
  CHECK_FALSE(res.raw_text.empty());
}
