#include "artinsight/config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "artinsight/mock_responses.hpp"

namespace artinsight {

namespace fs = std::filesystem;

namespace {

ProviderSpec make_spec(std::string id, ProviderKind kind, std::string base_url,
                       std::string key_env) {
  ProviderSpec spec;
  spec.id = std::move(id);
  spec.kind = kind;
  spec.base_url = std::move(base_url);
  spec.api_key_env = std::move(key_env);
  return spec;
}

ProviderKind kind_from(const std::string& name, const std::string& field) {
  if (name == "openai") return ProviderKind::openai;
  if (name == "anthropic") return ProviderKind::anthropic;
  if (name == "gemini") return ProviderKind::gemini;
  if (name == "mock") return ProviderKind::mock;
  throw Error(ErrorCode::invalid_value, fmt::format("unknown provider kind '{}'", name), field);
}

// Reads `key` into `out` when present, reporting type errors with a field path.
template <typename T>
void read(const Json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::invalid_value, fmt::format("bad value for '{}'", key),
                path + "." + key);
  }
}

void read_path(const Json& obj, const char* key, std::optional<fs::path>& out,
               const fs::path& base, const std::string& path) {
  std::string value;
  read(obj, key, value, path);
  if (value.empty()) return;
  fs::path p(value);
  out = p.is_absolute() || base.empty() ? p : base / p;
}

void reject_secrets(const Json& obj, const std::string& path) {
  if (obj.is_object() && obj.contains("api_key")) {
    throw Error(ErrorCode::invalid_value,
                "API keys must come from the environment; use api_key_env", path + ".api_key");
  }
}

const Json& section(const Json& doc, const char* key) {
  static const Json empty = Json::object();
  if (!doc.contains(key)) return empty;
  if (!doc[key].is_object()) {
    throw Error(ErrorCode::invalid_value, fmt::format("'{}' must be an object", key), key);
  }
  return doc[key];
}

ProviderSpec provider_from(const Json& j, const std::string& path) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_value, "provider must be an object", path);
  reject_secrets(j, path);
  ProviderSpec spec;
  read(j, "id", spec.id, path);
  if (spec.id.empty()) throw Error(ErrorCode::invalid_value, "provider id is required", path + ".id");
  std::string kind = spec.id;
  read(j, "kind", kind, path);
  spec.kind = kind_from(kind, path + ".kind");

  ProviderSpec defaults;
  for (const auto& d : default_config().providers) {
    if (d.kind == spec.kind) defaults = d;
  }
  spec.base_url = defaults.base_url;
  spec.api_key_env = defaults.api_key_env;
  read(j, "base_url", spec.base_url, path);
  read(j, "api_key_env", spec.api_key_env, path);
  read(j, "model_prefixes", spec.routing.model_prefixes, path);
  read(j, "strip_prefix", spec.routing.strip_prefix, path);
  read(j, "max_concurrent", spec.routing.max_concurrent, path);
  if (spec.routing.max_concurrent < 1) {
    throw Error(ErrorCode::invalid_value, "max_concurrent must be >= 1", path + ".max_concurrent");
  }
  if (j.contains("retry")) {
    const Json& r = j["retry"];
    const std::string rp = path + ".retry";
    read(r, "max_attempts", spec.routing.retry.max_attempts, rp);
    std::int64_t backoff = spec.routing.retry.base_backoff.count();
    read(r, "base_backoff_ms", backoff, rp);
    spec.routing.retry.base_backoff = std::chrono::milliseconds(backoff);
    read(r, "multiplier", spec.routing.retry.multiplier, rp);
    read(r, "jitter", spec.routing.retry.jitter, rp);
    if (spec.routing.retry.max_attempts < 1) {
      throw Error(ErrorCode::invalid_value, "max_attempts must be >= 1", rp + ".max_attempts");
    }
  }
  if (spec.kind != ProviderKind::mock && spec.base_url.empty()) {
    throw Error(ErrorCode::invalid_value, "base_url is required", path + ".base_url");
  }
  return spec;
}

}  // namespace

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::openai: return "openai";
    case ProviderKind::anthropic: return "anthropic";
    case ProviderKind::gemini: return "gemini";
    case ProviderKind::mock: return "mock";
  }
  return "?";
}

AppConfig default_config() {
  AppConfig c;
  c.providers = {
      make_spec("openai", ProviderKind::openai, "https://api.openai.com/v1", "OPENAI_API_KEY"),
      make_spec("anthropic", ProviderKind::anthropic, "https://api.anthropic.com/v1",
                "ANTHROPIC_API_KEY"),
      make_spec("google", ProviderKind::gemini,
                "https://generativelanguage.googleapis.com/v1beta/openai", "GEMINI_API_KEY"),
      make_spec("mock", ProviderKind::mock, "", ""),
  };
  return c;
}

AppConfig mock_config() {
  AppConfig c;
  c.providers = {make_spec("mock", ProviderKind::mock, "", "")};
  c.engine.default_model_id = "mock/describer";
  c.scorer.judge_model_id = "mock/judge";
  c.transcription.config.mode = TranscriberMode::mock;
  return c;
}

AppConfig config_from_json(const Json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::invalid_value, "config must be a JSON object");
  reject_secrets(doc, "");
  AppConfig c = default_config();

  if (doc.contains("providers")) {
    if (!doc["providers"].is_array()) {
      throw Error(ErrorCode::invalid_value, "providers must be an array", "providers");
    }
    c.providers.clear();
    for (std::size_t i = 0; i < doc["providers"].size(); ++i) {
      auto spec = provider_from(doc["providers"][i], fmt::format("providers[{}]", i));
      for (const auto& existing : c.providers) {
        if (existing.id == spec.id) {
          throw Error(ErrorCode::duplicate_provider,
                      fmt::format("provider '{}' listed twice", spec.id),
                      fmt::format("providers[{}].id", i));
        }
      }
      c.providers.push_back(std::move(spec));
    }
  }

  const Json& engine = section(doc, "engine");
  read(engine, "default_model_id", c.engine.default_model_id, "engine");
  read(engine, "image_size_limit", c.engine.image_size_limit, "engine");
  read(engine, "max_output_tokens", c.engine.max_output_tokens, "engine");
  read(engine, "temperature", c.engine.temperature, "engine");
  read(engine, "timeout_ms", c.engine.timeout_ms, "engine");
  read_path(engine, "prompt_dir", c.prompt_dir, base_dir, "engine");

  const Json& scorer = section(doc, "scorer");
  read(scorer, "judge_model_id", c.scorer.judge_model_id, "scorer");
  read(scorer, "temperature", c.scorer.temperature, "scorer");
  read(scorer, "max_output_tokens", c.scorer.max_output_tokens, "scorer");
  read(scorer, "timeout_ms", c.scorer.timeout_ms, "scorer");
  read_path(scorer, "exemplar_bundle", c.scorer_bundle, base_dir, "scorer");

  const Json& tr = section(doc, "transcription");
  reject_secrets(tr, "transcription");
  std::string mode = c.transcription.config.mode == TranscriberMode::mock ? "mock" : "external";
  read(tr, "mode", mode, "transcription");
  if (mode == "mock") {
    c.transcription.config.mode = TranscriberMode::mock;
  } else if (mode == "external") {
    c.transcription.config.mode = TranscriberMode::external_service;
    c.transcription.config.transcriber_id = "whisper-1";
  } else {
    throw Error(ErrorCode::invalid_value, fmt::format("unknown transcription mode '{}'", mode),
                "transcription.mode");
  }
  read(tr, "transcriber_id", c.transcription.config.transcriber_id, "transcription");
  read(tr, "language_tag", c.transcription.config.language_tag, "transcription");
  read(tr, "allow_mp3", c.transcription.config.allow_mp3, "transcription");
  read(tr, "max_concurrent", c.transcription.config.max_concurrent, "transcription");
  read(tr, "base_url", c.transcription.base_url, "transcription");
  read(tr, "api_key_env", c.transcription.api_key_env, "transcription");
  read(tr, "model", c.transcription.model, "transcription");
  read(tr, "mock_fallback", c.transcription.mock_fallback, "transcription");

  const Json& store = section(doc, "store");
  std::optional<fs::path> root;
  read_path(store, "root", root, base_dir, "store");
  if (root) c.store_root = *root;
  read(store, "blob_size_limit", c.store.blob_size_limit, "store");

  const Json& svc = section(doc, "service");
  read(svc, "host", c.service.host, "service");
  read(svc, "port", c.service.port, "service");
  read(svc, "workers", c.service.workers, "service");
  read(svc, "cors_origin", c.service.cors_origin, "service");
  read_path(svc, "static_dir", c.service.static_dir, base_dir, "service");
  if (c.service.port < 0 || c.service.port > 65535) {
    throw Error(ErrorCode::invalid_value, "port out of range", "service.port");
  }
  if (c.service.workers < 1) {
    throw Error(ErrorCode::invalid_value, "workers must be >= 1", "service.workers");
  }
  return c;
}

AppConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot read {}", path.string()));
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::invalid_value, "config is not valid JSON", path.string());
  }
  return config_from_json(doc, path.parent_path());
}

void register_providers(Gateway& gateway, const std::vector<ProviderSpec>& providers,
                        std::shared_ptr<HttpTransport> transport) {
  for (const auto& spec : providers) {
    std::shared_ptr<Provider> provider;
    switch (spec.kind) {
      case ProviderKind::mock: {
        auto mock = std::make_shared<MockProvider>();
        mock->set_responder(synthetic_responder());
        provider = mock;
        break;
      }
      case ProviderKind::openai:
      case ProviderKind::gemini:
        if (!transport) transport = make_http_transport();
        provider = std::make_shared<OpenAiChatProvider>(
            spec.base_url, ApiCredentials{spec.api_key_env}, transport);
        break;
      case ProviderKind::anthropic:
        if (!transport) transport = make_http_transport();
        provider = std::make_shared<AnthropicProvider>(
            spec.base_url, ApiCredentials{spec.api_key_env}, transport);
        break;
    }
    gateway.register_provider(spec.id, provider, spec.routing);
  }
}

std::shared_ptr<Transcriber> make_transcriber(const TranscriptionSpec& spec,
                                              std::shared_ptr<HttpTransport> transport) {
  if (spec.config.mode == TranscriberMode::mock) {
    auto mock = std::make_shared<MockTranscriber>();
    mock->set_fallback(spec.mock_fallback);
    return mock;
  }
  if (!transport) transport = make_http_transport();
  return std::make_shared<HttpTranscriber>(spec.base_url, ApiCredentials{spec.api_key_env},
                                           transport, spec.model);
}

}  // namespace artinsight
