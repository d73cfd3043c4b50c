#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "artinsight/description_engine.hpp"
#include "artinsight/gateway.hpp"
#include "artinsight/rubric_scorer.hpp"
#include "artinsight/session_store.hpp"
#include "artinsight/transcription.hpp"

namespace artinsight {

enum class ProviderKind { openai, anthropic, gemini, mock };

// API keys are never part of the config; only the name of the environment
// variable holding them.
struct ProviderSpec {
  std::string id;
  ProviderKind kind = ProviderKind::mock;
  std::string base_url;
  std::string api_key_env;
  ProviderConfig routing;
};

struct TranscriptionSpec {
  TranscriberConfig config;
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model = "whisper-1";
  std::string mock_fallback;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  int workers = 4;
  std::string cors_origin = "*";
};

struct AppConfig {
  std::vector<ProviderSpec> providers;
  EngineConfig engine;
  ScorerConfig scorer;
  std::optional<std::filesystem::path> scorer_bundle;
  std::optional<std::filesystem::path> prompt_dir;
  TranscriptionSpec transcription;
  std::filesystem::path store_root = "artinsight-data";
  StoreOptions store;
  ServiceConfig service;
};

/// Real providers (keys from OPENAI_API_KEY, ANTHROPIC_API_KEY,
/// GEMINI_API_KEY) plus the offline "mock" provider.
AppConfig default_config();

/// Offline configuration: every default model routes to the synthetic mock.
AppConfig mock_config();

/// Fields absent from `doc` keep their default_config() values. Relative
/// paths resolve against `base_dir`. Throws Error(invalid_value) with a field
/// path; a literal "api_key" field is rejected.
AppConfig config_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

std::string_view to_string(ProviderKind kind) noexcept;

/// Registers every provider on `gateway`. Mock providers answer with
/// synthetic_responder().
void register_providers(Gateway& gateway, const std::vector<ProviderSpec>& providers,
                        std::shared_ptr<HttpTransport> transport = nullptr);

std::shared_ptr<Transcriber> make_transcriber(const TranscriptionSpec& spec,
                                              std::shared_ptr<HttpTransport> transport = nullptr);

}  // namespace artinsight
