#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "artinsight/config.hpp"
#include "artinsight/description_engine.hpp"
#include "artinsight/session_store.hpp"
#include "artinsight/transcription.hpp"

namespace artinsight {

enum class JobState { queued, running, succeeded, failed };

struct JobInfo {
  std::string job_id;
  std::string kind;  // "describe" | "reprompt"
  std::string session_id;
  JobState state = JobState::queued;
  std::optional<std::string> error_code;
  std::optional<std::string> error_message;
  std::optional<int> revision_number;
};

void to_json(Json& j, const JobInfo& v);
std::string_view to_string(JobState state) noexcept;

/// HTTP status used for an error code in API responses.
int http_status_for(ErrorCode code) noexcept;

/// JSON-over-HTTP facade. No authentication: intended for a single local
/// household deployment. Long operations are answered with 202 and a job id
/// to poll at /api/jobs/{id}.
class ApiService {
 public:
  ApiService(SessionStore& store, const DescriptionEngine& engine,
             const TranscriptionService& transcription, ServiceConfig config = {});
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind();
  /// Serves until stop(); bind() must have been called.
  void listen();
  /// bind() + listen() on a background thread.
  int start();
  void stop();
  /// Blocks until the job queue is empty and no job is running.
  void wait_idle();

  std::optional<JobInfo> job(const std::string& job_id) const;
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace artinsight
