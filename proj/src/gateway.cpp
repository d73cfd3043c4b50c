#include "artinsight/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artinsight/hashing.hpp"

namespace artinsight {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Requests

std::optional<ValidationIssue> validate_request(const ProviderRequest& request) {
  if (request.model_id.empty()) {
    return ValidationIssue{ErrorCode::invalid_value, "model_id", "empty model id"};
  }
  if (request.parts.empty()) {
    return ValidationIssue{ErrorCode::invalid_value, "parts", "request has no parts"};
  }
  auto images = std::count_if(request.parts.begin(), request.parts.end(),
                              [](const MessagePart& p) { return p.is_image(); });
  if (images > 1) {
    return ValidationIssue{ErrorCode::invalid_value, "parts", "at most one image per request"};
  }
  if (request.timeout_ms <= 0) {
    return ValidationIssue{ErrorCode::invalid_value, "timeout_ms", "must be positive"};
  }
  if (request.temperature < 0.0) {
    return ValidationIssue{ErrorCode::invalid_value, "temperature", "must be >= 0"};
  }
  if (request.max_output_tokens <= 0) {
    return ValidationIssue{ErrorCode::invalid_value, "max_output_tokens", "must be positive"};
  }
  return std::nullopt;
}

Json request_content_json(const ProviderRequest& request) {
  Json parts = Json::array();
  for (const auto& part : request.parts) {
    Json p;
    p["role"] = part.role == Role::system ? "system" : "user";
    if (const auto* text = std::get_if<std::string>(&part.content)) {
      p["text"] = *text;
    } else {
      const auto& image = std::get<ImagePayload>(part.content);
      p["image"] = {{"media_type", image.media_type},
                    {"sha256", sha256_hex(image.base64_data)},
                    {"base64_length", image.base64_data.size()}};
    }
    parts.push_back(std::move(p));
  }
  return Json{{"model_id", request.model_id},
              {"parts", std::move(parts)},
              {"max_output_tokens", request.max_output_tokens},
              {"temperature", request.temperature}};
}

std::string request_hash(const ProviderRequest& request) {
  return sha256_hex(request_content_json(request).dump());
}

ProviderFailure::Kind ProviderFailure::classify_status(int status) noexcept {
  if (status == 401 || status == 403) return Kind::auth;
  if (status == 413) return Kind::payload_too_large;
  if (status == 408 || status == 429 || status >= 500) return Kind::transient;
  return Kind::terminal;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  if (!options_.sleeper) {
    options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  rng_.seed(options_.jitter_seed ? *options_.jitter_seed : std::random_device{}());
}

void Gateway::register_provider(const std::string& provider_id,
                                std::shared_ptr<Provider> provider, ProviderConfig config) {
  if (provider_id.empty()) throw Error(ErrorCode::invalid_value, "empty provider id", "provider_id");
  if (!provider) throw Error(ErrorCode::invalid_value, "null provider", "provider");
  if (config.model_prefixes.empty()) config.model_prefixes.push_back(provider_id + "/");
  if (config.retry.max_attempts < 1) {
    throw Error(ErrorCode::invalid_value, "attempt budget must be >= 1", "max_attempts");
  }
  if (config.max_concurrent < 1) {
    throw Error(ErrorCode::invalid_value, "concurrency cap must be >= 1", "max_concurrent");
  }
  std::lock_guard lock(mu_);
  for (const auto& slot : slots_) {
    if (slot->id == provider_id) {
      throw Error(ErrorCode::duplicate_provider,
                  fmt::format("provider '{}' already registered", provider_id), "provider_id");
    }
    for (const auto& prefix : config.model_prefixes) {
      const auto& taken = slot->config.model_prefixes;
      if (std::find(taken.begin(), taken.end(), prefix) != taken.end()) {
        throw Error(ErrorCode::duplicate_provider,
                    fmt::format("prefix '{}' already routed to '{}'", prefix, slot->id),
                    "model_prefixes");
      }
    }
  }
  auto slot = std::make_unique<Slot>();
  slot->id = provider_id;
  slot->provider = std::move(provider);
  slot->config = std::move(config);
  slots_.push_back(std::move(slot));
}

Gateway::Slot* Gateway::find_slot(const std::string& model_id, std::string* matched) const {
  std::lock_guard lock(mu_);
  Slot* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& slot : slots_) {
    for (const auto& prefix : slot->config.model_prefixes) {
      if (model_id.starts_with(prefix) && (best == nullptr || prefix.size() > best_len)) {
        best = slot.get();
        best_len = prefix.size();
        if (matched) *matched = prefix;
      }
    }
  }
  return best;
}

std::optional<std::string> Gateway::route(const std::string& model_id) const {
  if (auto* slot = find_slot(model_id, nullptr)) return slot->id;
  return std::nullopt;
}

std::vector<std::string> Gateway::provider_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& slot : slots_) ids.push_back(slot->id);
  return ids;
}

int Gateway::max_concurrent(const std::string& provider_id) const {
  std::lock_guard lock(mu_);
  for (const auto& slot : slots_) {
    if (slot->id == provider_id) return slot->config.max_concurrent;
  }
  throw Error(ErrorCode::not_found, fmt::format("unknown provider '{}'", provider_id));
}

void Gateway::wrap_providers(
    const std::function<std::shared_ptr<Provider>(const std::string&, std::shared_ptr<Provider>)>&
        wrap) {
  std::lock_guard lock(mu_);
  for (auto& slot : slots_) slot->provider = wrap(slot->id, slot->provider);
}

std::chrono::milliseconds Gateway::backoff_delay(const RetryPolicy& policy, int retry_index) {
  double base = static_cast<double>(policy.base_backoff.count()) *
                std::pow(policy.multiplier, std::max(0, retry_index - 1));
  double factor = 1.0;
  if (policy.jitter > 0.0) {
    std::uniform_real_distribution<double> dist(-policy.jitter, policy.jitter);
    std::lock_guard lock(rng_mu_);
    factor += dist(rng_);
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(base * factor)));
}

ProviderResponse Gateway::send(const ProviderRequest& request) {
  if (auto issue = validate_request(request)) {
    throw Error(issue->code, issue->message, issue->field);
  }
  std::string prefix;
  Slot* slot = find_slot(request.model_id, &prefix);
  if (slot == nullptr) {
    throw Error(ErrorCode::provider_error,
                fmt::format("no provider registered for model '{}'", request.model_id),
                "model_id");
  }
  ProviderRequest upstream = request;
  if (slot->config.strip_prefix) upstream.model_id = request.model_id.substr(prefix.size());

  const auto& policy = slot->config.retry;
  for (int attempt = 1;; ++attempt) {
    std::shared_ptr<Provider> provider;
    {
      std::unique_lock lock(slot->mu);
      slot->cv.wait(lock, [&] { return slot->in_flight < slot->config.max_concurrent; });
      ++slot->in_flight;
    }
    {
      std::lock_guard lock(mu_);
      provider = slot->provider;
    }
    auto release = [slot] {
      {
        std::lock_guard lock(slot->mu);
        --slot->in_flight;
      }
      slot->cv.notify_one();
    };
    auto started = std::chrono::steady_clock::now();
    try {
      ProviderResponse response = provider->complete(upstream);
      release();
      if (response.latency_ms <= 0) {
        response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - started)
                                  .count();
      }
      response.model_id = request.model_id;
      return response;
    } catch (const ProviderFailure& failure) {
      release();
      switch (failure.kind()) {
        case ProviderFailure::Kind::auth:
          throw Error(ErrorCode::auth_error, failure.what(), "model_id");
        case ProviderFailure::Kind::payload_too_large:
          throw Error(ErrorCode::payload_too_large, failure.what());
        case ProviderFailure::Kind::terminal:
          throw Error(ErrorCode::provider_error, failure.what());
        case ProviderFailure::Kind::transient:
        case ProviderFailure::Kind::timeout:
          break;
      }
      if (attempt >= policy.max_attempts) {
        throw Error(ErrorCode::timeout_exhausted,
                    fmt::format("{} attempt(s) to '{}' failed; last: {}", attempt,
                                request.model_id, failure.what()));
      }
      auto delay = backoff_delay(policy, attempt);
      spdlog::debug("retrying {} after {} ms (attempt {} failed: {})", request.model_id,
                    delay.count(), attempt, failure.what());
      options_.sleeper(delay);
    } catch (...) {
      release();
      throw;
    }
  }
}

// ---------------------------------------------------------------------------
// Mock provider

void MockProvider::script(const std::string& hash, std::string response) {
  std::lock_guard lock(mu_);
  scripted_[hash] = std::move(response);
}

void MockProvider::set_responder(Responder responder) {
  std::lock_guard lock(mu_);
  responder_ = std::move(responder);
}

void MockProvider::inject_faults(std::vector<ProviderFailure::Kind> faults) {
  std::lock_guard lock(mu_);
  faults_.insert(faults_.end(), faults.begin(), faults.end());
}

void MockProvider::fail_when(std::function<bool(const ProviderRequest&)> predicate,
                             ProviderFailure::Kind kind) {
  std::lock_guard lock(mu_);
  fail_predicate_ = std::move(predicate);
  fail_kind_ = kind;
}

ProviderResponse MockProvider::complete(const ProviderRequest& request) {
  const std::string hash = request_hash(request);
  Responder responder;
  std::optional<std::string> scripted;
  {
    std::lock_guard lock(mu_);
    Call call{hash, request.model_id, false};
    if (!faults_.empty()) {
      auto kind = faults_.front();
      faults_.pop_front();
      call.failed = true;
      calls_.push_back(call);
      throw ProviderFailure(kind, "injected fault");
    }
    if (fail_predicate_ && fail_predicate_(request)) {
      call.failed = true;
      calls_.push_back(call);
      throw ProviderFailure(fail_kind_, "injected fault");
    }
    calls_.push_back(call);
    if (auto it = scripted_.find(hash); it != scripted_.end()) scripted = it->second;
    responder = responder_;
  }
  ProviderResponse response;
  response.model_id = request.model_id;
  response.latency_ms = latency_ms_.load();
  if (response.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(response.latency_ms));
  if (scripted) {
    response.raw_text = *scripted;
  } else if (responder) {
    response.raw_text = responder(request);
  } else {
    throw ProviderFailure(ProviderFailure::Kind::terminal,
                          fmt::format("mock has no response for request {}", hash));
  }
  return response;
}

std::vector<MockProvider::Call> MockProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockProvider::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

void MockProvider::clear_calls() {
  std::lock_guard lock(mu_);
  calls_.clear();
}

// ---------------------------------------------------------------------------
// Record / replay

std::string exchange_key(const std::string& provider_id, const ProviderRequest& request) {
  return sha256_hex(provider_id + "\n" + request_hash(request));
}

RecordingProvider::RecordingProvider(std::string provider_id, std::shared_ptr<Provider> inner,
                                     fs::path dir)
    : provider_id_(std::move(provider_id)), inner_(std::move(inner)), dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

ProviderResponse RecordingProvider::complete(const ProviderRequest& request) {
  ProviderResponse response = inner_->complete(request);
  const std::string key = exchange_key(provider_id_, request);
  Json doc{{"provider_id", provider_id_},
           {"key", key},
           {"request", request_content_json(request)},
           {"response", {{"raw_text", response.raw_text}}}};
  std::lock_guard lock(mu_);
  auto path = dir_ / (key + ".json");
  auto tmp = dir_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write {}", tmp.string()));
  }
  fs::rename(tmp, path);
  return response;
}

ReplayProvider::ReplayProvider(std::string provider_id, fs::path dir)
    : provider_id_(std::move(provider_id)), dir_(std::move(dir)) {}

ProviderResponse ReplayProvider::complete(const ProviderRequest& request) {
  const std::string key = exchange_key(provider_id_, request);
  std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
  if (!in) {
    throw ProviderFailure(ProviderFailure::Kind::terminal,
                          fmt::format("no recorded exchange {} for {}", key, request.model_id));
  }
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains("response")) {
    throw ProviderFailure(ProviderFailure::Kind::terminal,
                          fmt::format("corrupt recorded exchange {}", key));
  }
  ProviderResponse response;
  response.raw_text = doc["response"].at("raw_text").get<std::string>();
  response.model_id = request.model_id;
  return response;
}

// ---------------------------------------------------------------------------
// HTTP providers

std::string ApiCredentials::resolve() const {
  const char* value = env_var.empty() ? nullptr : std::getenv(env_var.c_str());
  if (value == nullptr || *value == '\0') {
    throw ProviderFailure(ProviderFailure::Kind::auth,
                          fmt::format("environment variable {} is not set",
                                      env_var.empty() ? "<unset>" : env_var));
  }
  return value;
}

namespace {

std::string join_system_text(const ProviderRequest& request) {
  std::string out;
  for (const auto& part : request.parts) {
    if (part.role != Role::system) continue;
    if (const auto* text = std::get_if<std::string>(&part.content)) {
      if (!out.empty()) out += "\n\n";
      out += *text;
    }
  }
  return out;
}

HttpResponse checked_post(HttpTransport& transport, const HttpRequest& http) {
  HttpResponse res = transport.post(http);
  if (res.status < 200 || res.status >= 300) {
    throw ProviderFailure(ProviderFailure::classify_status(res.status),
                          fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 300)),
                          res.status);
  }
  return res;
}

Json parse_provider_json(const std::string& body) {
  Json doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded()) {
    throw ProviderFailure(ProviderFailure::Kind::terminal, "provider returned invalid JSON");
  }
  return doc;
}

}  // namespace

OpenAiChatProvider::OpenAiChatProvider(std::string base_url, ApiCredentials credentials,
                                       std::shared_ptr<HttpTransport> transport)
    : base_url_(std::move(base_url)),
      credentials_(std::move(credentials)),
      transport_(std::move(transport)) {}

Json OpenAiChatProvider::build_body(const ProviderRequest& request) {
  Json messages = Json::array();
  std::string system = join_system_text(request);
  if (!system.empty()) messages.push_back({{"role", "system"}, {"content", system}});
  Json user = Json::array();
  for (const auto& part : request.parts) {
    if (part.role != Role::user) continue;
    if (const auto* text = std::get_if<std::string>(&part.content)) {
      user.push_back({{"type", "text"}, {"text", *text}});
    } else {
      const auto& image = std::get<ImagePayload>(part.content);
      user.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", fmt::format("data:{};base64,{}", image.media_type, image.base64_data)}}}});
    }
  }
  if (!user.empty()) messages.push_back({{"role", "user"}, {"content", user}});
  return Json{{"model", request.model_id},
              {"messages", messages},
              {"max_tokens", request.max_output_tokens},
              {"temperature", request.temperature}};
}

ProviderResponse OpenAiChatProvider::parse_body(const std::string& body) {
  Json doc = parse_provider_json(body);
  ProviderResponse out;
  try {
    out.raw_text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ProviderFailure(ProviderFailure::Kind::terminal, "response has no message content");
  }
  if (auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
    out.token_usage = TokenUsage{it->value("prompt_tokens", std::int64_t{0}),
                                 it->value("completion_tokens", std::int64_t{0})};
  }
  return out;
}

ProviderResponse OpenAiChatProvider::complete(const ProviderRequest& request) {
  HttpRequest http;
  http.url = base_url_ + "/chat/completions";
  http.headers = {{"Authorization", "Bearer " + credentials_.resolve()}};
  http.body = build_body(request).dump();
  http.content_type = "application/json";
  http.timeout = std::chrono::milliseconds(request.timeout_ms);
  return parse_body(checked_post(*transport_, http).body);
}

AnthropicProvider::AnthropicProvider(std::string base_url, ApiCredentials credentials,
                                     std::shared_ptr<HttpTransport> transport)
    : base_url_(std::move(base_url)),
      credentials_(std::move(credentials)),
      transport_(std::move(transport)) {}

Json AnthropicProvider::build_body(const ProviderRequest& request) {
  Json content = Json::array();
  for (const auto& part : request.parts) {
    if (part.role != Role::user) continue;
    if (const auto* text = std::get_if<std::string>(&part.content)) {
      content.push_back({{"type", "text"}, {"text", *text}});
    } else {
      const auto& image = std::get<ImagePayload>(part.content);
      content.push_back({{"type", "image"},
                         {"source",
                          {{"type", "base64"},
                           {"media_type", image.media_type},
                           {"data", image.base64_data}}}});
    }
  }
  Json body{{"model", request.model_id},
            {"max_tokens", request.max_output_tokens},
            {"temperature", request.temperature},
            {"messages", Json::array({{{"role", "user"}, {"content", content}}})}};
  std::string system = join_system_text(request);
  if (!system.empty()) body["system"] = system;
  return body;
}

ProviderResponse AnthropicProvider::parse_body(const std::string& body) {
  Json doc = parse_provider_json(body);
  ProviderResponse out;
  auto it = doc.find("content");
  if (it == doc.end() || !it->is_array()) {
    throw ProviderFailure(ProviderFailure::Kind::terminal, "response has no content");
  }
  for (const auto& block : *it) {
    if (block.value("type", "") == "text") out.raw_text += block.value("text", "");
  }
  if (auto u = doc.find("usage"); u != doc.end() && u->is_object()) {
    out.token_usage = TokenUsage{u->value("input_tokens", std::int64_t{0}),
                                 u->value("output_tokens", std::int64_t{0})};
  }
  return out;
}

ProviderResponse AnthropicProvider::complete(const ProviderRequest& request) {
  HttpRequest http;
  http.url = base_url_ + "/messages";
  http.headers = {{"x-api-key", credentials_.resolve()}, {"anthropic-version", "2023-06-01"}};
  http.body = build_body(request).dump();
  http.content_type = "application/json";
  http.timeout = std::chrono::milliseconds(request.timeout_ms);
  return parse_body(checked_post(*transport_, http).body);
}

}  // namespace artinsight
