#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "artinsight/domain.hpp"

namespace artinsight {

// ---------------------------------------------------------------------------
// Provider-neutral exchange

enum class Role { system, user };

/// Base64 image data plus its declared media type.
struct ImagePayload {
  std::string media_type;
  std::string base64_data;

  bool operator==(const ImagePayload&) const = default;
};

struct MessagePart {
  Role role = Role::user;
  std::variant<std::string, ImagePayload> content;

  bool is_image() const noexcept { return std::holds_alternative<ImagePayload>(content); }
  bool operator==(const MessagePart&) const = default;
};

inline constexpr std::chrono::milliseconds kDefaultTimeout{60'000};

struct ProviderRequest {
  std::string model_id;
  std::vector<MessagePart> parts;
  int max_output_tokens = 2048;
  double temperature = 0.0;
  std::int64_t timeout_ms = kDefaultTimeout.count();

  bool operator==(const ProviderRequest&) const = default;
};

std::optional<ValidationIssue> validate_request(const ProviderRequest& request);

/// Canonical JSON of the fields that determine the completion. timeout_ms is
/// excluded so replays survive timeout tuning.
Json request_content_json(const ProviderRequest& request);
std::string request_hash(const ProviderRequest& request);

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct ProviderResponse {
  std::string raw_text;
  std::string model_id;
  std::int64_t latency_ms = 0;
  std::optional<TokenUsage> token_usage;
};

/// Thrown by provider implementations; the gateway decides whether to retry.
class ProviderFailure : public std::runtime_error {
 public:
  enum class Kind { transient, timeout, auth, payload_too_large, terminal };

  ProviderFailure(Kind kind, std::string message, int http_status = 0)
      : std::runtime_error(std::move(message)), kind_(kind), http_status_(http_status) {}

  Kind kind() const noexcept { return kind_; }
  int http_status() const noexcept { return http_status_; }
  bool retryable() const noexcept { return kind_ == Kind::transient || kind_ == Kind::timeout; }

  /// Maps an HTTP status to a failure kind: 401/403 auth, 413 too large,
  /// 408/429/5xx transient, everything else terminal.
  static Kind classify_status(int status) noexcept;

 private:
  Kind kind_;
  int http_status_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  /// `request.model_id` is the upstream model name (routing prefix removed).
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Gateway

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{1000};
  double multiplier = 2.0;
  double jitter = 0.2;
};

struct ProviderConfig {
  // Model-id prefixes routed to this provider; defaults to "<provider_id>/".
  std::vector<std::string> model_prefixes;
  bool strip_prefix = true;
  RetryPolicy retry;
  int max_concurrent = 4;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct GatewayOptions {
  Sleeper sleeper;  // defaults to std::this_thread::sleep_for
  std::optional<std::uint64_t> jitter_seed;
};

class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Throws Error(duplicate_provider) if the id or one of its prefixes is taken.
  void register_provider(const std::string& provider_id, std::shared_ptr<Provider> provider,
                         ProviderConfig config = {});

  /// Routes by longest matching prefix; retries transient failures with
  /// exponential backoff and jitter. Safe to call concurrently.
  ProviderResponse send(const ProviderRequest& request);

  /// Replaces every registered provider with `wrap(id, provider)`. Used to
  /// interpose recording and replay.
  void wrap_providers(
      const std::function<std::shared_ptr<Provider>(const std::string&, std::shared_ptr<Provider>)>&
          wrap);

  std::vector<std::string> provider_ids() const;
  /// Provider id that `model_id` routes to, if any.
  std::optional<std::string> route(const std::string& model_id) const;
  int max_concurrent(const std::string& provider_id) const;

  /// Delay before retry number `retry_index` (1-based).
  std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry_index);

 private:
  struct Slot {
    std::string id;
    std::shared_ptr<Provider> provider;
    ProviderConfig config;
    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
  };

  Slot* find_slot(const std::string& model_id, std::string* matched_prefix) const;

  GatewayOptions options_;
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<Slot>> slots_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Mock provider

class MockProvider : public Provider {
 public:
  using Responder = std::function<std::string(const ProviderRequest&)>;

  struct Call {
    std::string request_hash;
    std::string model_id;
    bool failed = false;
  };

  /// Canned answer for a request with the given request_hash().
  void script(const std::string& request_hash, std::string response);
  /// Fallback when no script entry matches.
  void set_responder(Responder responder);
  /// The next calls fail in order with these kinds before normal behavior resumes.
  void inject_faults(std::vector<ProviderFailure::Kind> faults);
  /// Fail every call for which `predicate` returns true.
  void fail_when(std::function<bool(const ProviderRequest&)> predicate, ProviderFailure::Kind kind);
  /// Each successful call sleeps this long before answering.
  void set_latency(std::int64_t latency_ms) { latency_ms_ = latency_ms; }

  ProviderResponse complete(const ProviderRequest& request) override;

  std::vector<Call> calls() const;
  std::size_t call_count() const;
  void clear_calls();

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> scripted_;
  Responder responder_;
  std::deque<ProviderFailure::Kind> faults_;
  std::function<bool(const ProviderRequest&)> fail_predicate_;
  ProviderFailure::Kind fail_kind_ = ProviderFailure::Kind::terminal;
  std::vector<Call> calls_;
  std::atomic<std::int64_t> latency_ms_{0};
};

// ---------------------------------------------------------------------------
// Record / replay

/// Key under which a provider exchange is recorded.
std::string exchange_key(const std::string& provider_id, const ProviderRequest& request);

/// Forwards to `inner` and writes every successful exchange to `dir`.
class RecordingProvider : public Provider {
 public:
  RecordingProvider(std::string provider_id, std::shared_ptr<Provider> inner,
                    std::filesystem::path dir);
  ProviderResponse complete(const ProviderRequest& request) override;

 private:
  std::string provider_id_;
  std::shared_ptr<Provider> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

/// Answers only from exchanges previously written by RecordingProvider.
class ReplayProvider : public Provider {
 public:
  ReplayProvider(std::string provider_id, std::filesystem::path dir);
  ProviderResponse complete(const ProviderRequest& request) override;

 private:
  std::string provider_id_;
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// HTTP providers

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::string content_type;
  std::chrono::milliseconds timeout{kDefaultTimeout};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// POSTs `request`. Throws ProviderFailure(timeout) when no response arrives.
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport();

/// Reads the key from an environment variable at call time; it is never
/// written anywhere.
struct ApiCredentials {
  std::string env_var;
  std::string resolve() const;
};

/// OpenAI-style /chat/completions. Also serves Gemini's OpenAI-compatible
/// endpoint.
class OpenAiChatProvider : public Provider {
 public:
  OpenAiChatProvider(std::string base_url, ApiCredentials credentials,
                     std::shared_ptr<HttpTransport> transport);
  ProviderResponse complete(const ProviderRequest& request) override;

  static Json build_body(const ProviderRequest& request);
  static ProviderResponse parse_body(const std::string& body);

 private:
  std::string base_url_;
  ApiCredentials credentials_;
  std::shared_ptr<HttpTransport> transport_;
};

/// Anthropic /v1/messages.
class AnthropicProvider : public Provider {
 public:
  AnthropicProvider(std::string base_url, ApiCredentials credentials,
                    std::shared_ptr<HttpTransport> transport);
  ProviderResponse complete(const ProviderRequest& request) override;

  static Json build_body(const ProviderRequest& request);
  static ProviderResponse parse_body(const std::string& body);

 private:
  std::string base_url_;
  ApiCredentials credentials_;
  std::shared_ptr<HttpTransport> transport_;
};

}  // namespace artinsight
