#include "artinsight/api_service.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artinsight/hashing.hpp"
#include "artinsight/media.hpp"

namespace artinsight {

std::string_view to_string(JobState state) noexcept {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::succeeded: return "succeeded";
    case JobState::failed: return "failed";
  }
  return "?";
}

void to_json(Json& j, const JobInfo& v) {
  j = Json{{"job_id", v.job_id},
           {"kind", v.kind},
           {"session_id", v.session_id},
           {"state", to_string(v.state)}};
  if (v.error_code) j["error_code"] = *v.error_code;
  if (v.error_message) j["error_message"] = *v.error_message;
  if (v.revision_number) j["revision_number"] = *v.revision_number;
}

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict:
    case ErrorCode::invalid_state: return 409;
    case ErrorCode::image_too_large:
    case ErrorCode::too_large:
    case ErrorCode::payload_too_large: return 413;
    case ErrorCode::unsupported_format: return 415;
    case ErrorCode::empty_transcript: return 422;
    case ErrorCode::service_error:
    case ErrorCode::provider_error:
    case ErrorCode::auth_error:
    case ErrorCode::timeout_exhausted: return 502;
    case ErrorCode::bad_image:
    case ErrorCode::invalid_value:
    case ErrorCode::parse_error:
    case ErrorCode::category_out_of_range:
    case ErrorCode::negative_misc:
    case ErrorCode::empty_note:
    case ErrorCode::empty_description: return 400;
    default: return 500;
  }
}

namespace {

constexpr int kSaveAttempts = 8;

Json error_body(std::string_view code, std::string_view message, std::string_view field = {}) {
  Json err{{"code", code}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return Json{{"error", err}};
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status_for(e.code()), error_body(to_string(e.code()), e.message(), e.field()));
}

template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    send_json(res, 500, error_body("internal", e.what()));
  }
}

// Multipart file field, or the raw body when the request is not multipart.
std::optional<httplib::MultipartFormData> upload(const httplib::Request& req,
                                                 const std::string& field) {
  if (req.is_multipart_form_data()) {
    if (!req.has_file(field)) return std::nullopt;
    return req.get_file_value(field);
  }
  if (req.body.empty()) return std::nullopt;
  httplib::MultipartFormData part;
  part.name = field;
  part.content = req.body;
  part.content_type = req.get_header_value("Content-Type");
  return part;
}

std::optional<std::string> form_field(const httplib::Request& req, const std::string& key) {
  if (req.is_multipart_form_data() && req.has_file(key)) return req.get_file_value(key).content;
  if (req.has_param(key)) return req.get_param_value(key);
  return std::nullopt;
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::size_t size_param(const httplib::Request& req, const std::string& key, std::size_t fallback,
                       std::size_t max) {
  if (!req.has_param(key)) return fallback;
  try {
    long long v = std::stoll(req.get_param_value(key));
    if (v < 0) throw std::out_of_range(key);
    return std::min<std::size_t>(static_cast<std::size_t>(v), max);
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_value, fmt::format("'{}' must be a non-negative integer", key),
                key);
  }
}

}  // namespace

struct ApiService::Impl {
  SessionStore& store;
  const DescriptionEngine& engine;
  const TranscriptionService& transcription;
  ServiceConfig config;
  httplib::Server server;
  int bound_port = -1;
  std::thread listener;

  mutable std::mutex mu;
  std::condition_variable work_cv;
  std::condition_variable idle_cv;
  std::deque<std::function<void()>> queue;
  int running = 0;
  bool stopping = false;
  std::vector<std::thread> workers;
  std::map<std::string, JobInfo> jobs;
  std::set<std::string> reprompting;

  Impl(SessionStore& s, const DescriptionEngine& e, const TranscriptionService& t, ServiceConfig c)
      : store(s), engine(e), transcription(t), config(std::move(c)) {
    for (int i = 0; i < std::max(1, config.workers); ++i) {
      workers.emplace_back([this] { work(); });
    }
    routes();
  }

  ~Impl() {
    server.stop();
    if (listener.joinable()) listener.join();
    {
      std::lock_guard lock(mu);
      stopping = true;
    }
    work_cv.notify_all();
    for (auto& w : workers) w.join();
  }

  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mu);
        work_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (queue.empty()) return;
        task = std::move(queue.front());
        queue.pop_front();
        ++running;
      }
      task();
      {
        std::lock_guard lock(mu);
        --running;
      }
      idle_cv.notify_all();
    }
  }

  std::string enqueue_job(std::string kind, std::string session_id,
                          std::function<std::optional<int>()> body) {
    JobInfo info;
    info.job_id = new_session_id();
    info.kind = std::move(kind);
    info.session_id = std::move(session_id);
    const std::string id = info.job_id;
    {
      std::lock_guard lock(mu);
      jobs[id] = info;
      queue.push_back([this, id, body = std::move(body)] {
        update(id, [](JobInfo& j) { j.state = JobState::running; });
        try {
          auto revision = body();
          update(id, [&](JobInfo& j) {
            j.state = JobState::succeeded;
            j.revision_number = revision;
          });
        } catch (const Error& e) {
          update(id, [&](JobInfo& j) {
            j.state = JobState::failed;
            j.error_code = std::string(to_string(e.code()));
            j.error_message = e.message();
          });
        } catch (const std::exception& e) {
          update(id, [&](JobInfo& j) {
            j.state = JobState::failed;
            j.error_code = "internal";
            j.error_message = e.what();
          });
        }
      });
    }
    work_cv.notify_one();
    return id;
  }

  void update(const std::string& id, const std::function<void(JobInfo&)>& fn) {
    std::lock_guard lock(mu);
    fn(jobs.at(id));
  }

  // Applies `change` to the latest stored copy, retrying on concurrent writes.
  ArtworkSession save_with_rebase(const std::string& session_id,
                                  const std::function<ArtworkSession(const ArtworkSession&)>& change) {
    for (int attempt = 1;; ++attempt) {
      ArtworkSession latest = store.load_session(session_id);
      try {
        return store.save_session(change(latest));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::conflict || attempt >= kSaveAttempts) throw;
        spdlog::debug("session {} changed concurrently; rebasing", session_id);
      }
    }
  }

  std::optional<int> run_describe(const std::string& session_id, std::optional<std::string> model) {
    try {
      ArtworkSession pending = store.load_session(session_id);
      ArtworkSession ready = engine.describe_session(pending, model);
      auto saved = save_with_rebase(session_id, [&](const ArtworkSession& latest) {
        ArtworkSession next = ready;
        next.audio = latest.audio;
        next.store_version = latest.store_version;
        return next;
      });
      return saved.revisions.back().number;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::not_found) {
        save_with_rebase(session_id, [&](const ArtworkSession& latest) {
          ArtworkSession next = latest;
          next.status = SessionStatus::failed;
          next.error = e.what();
          return next;
        });
      }
      throw;
    }
  }

  std::optional<int> run_reprompt(const std::string& session_id, const std::string& transcript,
                                  std::optional<std::string> model) {
    struct Release {
      Impl* self;
      std::string id;
      ~Release() {
        std::lock_guard lock(self->mu);
        self->reprompting.erase(id);
      }
    } release{this, session_id};

    ArtworkSession base = store.load_session(session_id);
    ArtworkSession next = engine.reprompt_with_transcript(base, transcript, model);
    const Revision fresh = next.revisions.back();
    auto saved = save_with_rebase(session_id, [&](const ArtworkSession& latest) {
      if (latest.revisions.size() == base.revisions.size()) {
        ArtworkSession out = next;
        out.audio = latest.audio;
        out.store_version = latest.store_version;
        return out;
      }
      return append_revision(latest, fresh.result, fresh.cause, fresh.transcript);
    });
    return saved.revisions.back().number;
  }

  void routes() {
    const std::string origin = config.cors_origin;
    if (!origin.empty()) {
      server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
    }
    server.set_payload_max_length(
        std::max(engine.config().image_size_limit, std::size_t{32} << 20) + (1 << 20));
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                    std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_json(res, 500, error_body("internal", e.what()));
      }
    });
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });

    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      std::size_t queued;
      {
        std::lock_guard lock(mu);
        queued = queue.size() + static_cast<std::size_t>(running);
      }
      send_json(res, 200,
                Json{{"status", "ok"},
                     {"prompt_revision", engine.bundle().revision},
                     {"default_model_id", engine.config().default_model_id},
                     {"pending_jobs", queued}});
    });

    server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { create_session(req, res); });
    });

    server.Get("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::size_t page = size_param(req, "page", 0, 1u << 30);
        const std::size_t page_size = std::max<std::size_t>(size_param(req, "page_size", 50, 500), 1);
        Json list = store.list_sessions(page, page_size);
        send_json(res, 200,
                  Json{{"sessions", list},
                       {"page", page},
                       {"page_size", page_size},
                       {"total", store.session_count()}});
      });
    });

    server.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req,
                                                   httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, Json(store.load_session(req.matches[1]))); });
    });

    server.Delete(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
      guarded(res, [&] {
        const bool erase = req.has_param("erase_blobs") &&
                           req.get_param_value("erase_blobs") != "false" &&
                           req.get_param_value("erase_blobs") != "0";
        store.purge_session(req.matches[1], erase);
        res.status = 204;
      });
    });

    server.Post(R"(/api/sessions/([^/]+)/audio)", [this](const httplib::Request& req,
                                                          httplib::Response& res) {
      guarded(res, [&] { attach_audio(req, res); });
    });

    server.Post(R"(/api/sessions/([^/]+)/reprompt)", [this](const httplib::Request& req,
                                                             httplib::Response& res) {
      guarded(res, [&] { reprompt(req, res); });
    });

    server.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) {
        send_json(res, 404, error_body("not_found", "unknown job", "job_id"));
      } else {
        send_json(res, 200, Json(it->second));
      }
    });

    server.Get(R"(/api/blobs/(sha256:[0-9a-f]{64}))", [this](const httplib::Request& req,
                                                               httplib::Response& res) {
      guarded(res, [&] {
        BlobRef ref{req.matches[1]};
        if (!store.has_blob(ref)) throw Error(ErrorCode::not_found, "unknown blob", "ref");
        Blob blob = store.get_blob(ref);
        res.status = 200;
        res.set_header("Cache-Control", "private, max-age=31536000, immutable");
        res.set_content(std::string(blob.bytes.begin(), blob.bytes.end()),
                        blob.media_type.empty() ? "application/octet-stream" : blob.media_type);
      });
    });

    if (config.static_dir) {
      if (!server.set_mount_point("/", config.static_dir->string())) {
        spdlog::warn("static directory {} not found; not serving assets",
                     config.static_dir->string());
      }
    }
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    auto image = upload(req, "image");
    if (!image || image->content.empty()) {
      throw Error(ErrorCode::bad_image, "an 'image' file is required", "image");
    }
    const auto limit = engine.config().image_size_limit;
    if (image->content.size() > limit) {
      throw Error(ErrorCode::image_too_large,
                  fmt::format("image is {} bytes, limit {}", image->content.size(), limit), "image");
    }
    auto format = detect_image(bytes_of(image->content));
    if (!format) throw Error(ErrorCode::bad_image, "not a valid PNG or JPEG image", "image");
    std::optional<std::string> model = form_field(req, "model_id");
    if (model && model->empty()) model.reset();

    ArtworkSession session;
    session.session_id = new_session_id();
    session.created_at = now_ms();
    session.image_media_type = std::string(media_type(*format));
    session.image_ref = store.put_blob(bytes_of(image->content), session.image_media_type);
    session.status = SessionStatus::pending;
    ArtworkSession saved = store.save_session(session);

    const std::string id = saved.session_id;
    const std::string job = enqueue_job("describe", id, [this, id, model] {
      return run_describe(id, model);
    });
    res.set_header("Location", "/api/sessions/" + id);
    send_json(res, 202, Json{{"session_id", id}, {"job_id", job}, {"status", "pending"}});
  }

  void attach_audio(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store.has_session(id)) throw Error(ErrorCode::not_found, "unknown session", "session_id");
    auto audio = upload(req, "audio");
    if (!audio || audio->content.empty()) {
      throw Error(ErrorCode::invalid_value, "an 'audio' file is required", "audio");
    }
    std::optional<std::int64_t> declared;
    if (auto d = form_field(req, "duration_ms")) {
      try {
        declared = std::stoll(*d);
      } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_value, "duration_ms must be an integer", "duration_ms");
      }
    }
    const AudioFormat format = transcription.check_format(bytes_of(audio->content));
    BlobRef ref = store.put_blob(bytes_of(audio->content), std::string(media_type(format)));
    AudioNote note = transcription.transcribe(store, ref, declared);
    save_with_rebase(id, [&](const ArtworkSession& latest) {
      ArtworkSession next = latest;
      next.audio = note;
      return next;
    });
    send_json(res, 200, Json{{"session_id", id}, {"transcript", note.transcript}, {"audio", note}});
  }

  void reprompt(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    ArtworkSession session = store.load_session(id);
    std::optional<std::string> transcript;
    std::optional<std::string> model;
    if (!req.body.empty() && !req.is_multipart_form_data()) {
      Json body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        throw Error(ErrorCode::invalid_value, "body must be a JSON object");
      }
      if (body.contains("transcript") && body["transcript"].is_string()) {
        transcript = body["transcript"].get<std::string>();
      }
      if (body.contains("model_id") && body["model_id"].is_string()) {
        model = body["model_id"].get<std::string>();
      }
    }
    if (!transcript && session.audio) transcript = session.audio->transcript;
    if (!transcript || transcript->find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(ErrorCode::invalid_state, "session has no transcript to use", "audio");
    }
    if (session.status != SessionStatus::ready) {
      throw Error(ErrorCode::invalid_state, "session is not ready", "status");
    }
    {
      std::lock_guard lock(mu);
      if (!reprompting.insert(id).second) {
        throw Error(ErrorCode::conflict, "a re-prompt is already in flight for this session",
                    "session_id");
      }
    }
    std::string job;
    try {
      job = enqueue_job("reprompt", id, [this, id, t = *transcript, model] {
        return run_reprompt(id, t, model);
      });
    } catch (...) {
      std::lock_guard lock(mu);
      reprompting.erase(id);
      throw;
    }
    send_json(res, 202, Json{{"session_id", id}, {"job_id", job}, {"status", "queued"}});
  }
};

ApiService::ApiService(SessionStore& store, const DescriptionEngine& engine,
                       const TranscriptionService& transcription, ServiceConfig config)
    : impl_(std::make_unique<Impl>(store, engine, transcription, std::move(config))) {}

ApiService::~ApiService() = default;

int ApiService::bind() {
  if (impl_->config.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->bound_port = impl_->config.port;
  }
  if (impl_->bound_port < 0) {
    throw Error(ErrorCode::io_error,
                fmt::format("cannot bind {}:{}", impl_->config.host, impl_->config.port));
  }
  return impl_->bound_port;
}

void ApiService::listen() { impl_->server.listen_after_bind(); }

int ApiService::start() {
  int port = bind();
  impl_->listener = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return port;
}

void ApiService::stop() {
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

void ApiService::wait_idle() {
  std::unique_lock lock(impl_->mu);
  impl_->idle_cv.wait(lock, [&] { return impl_->queue.empty() && impl_->running == 0; });
}

std::optional<JobInfo> ApiService::job(const std::string& job_id) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->jobs.find(job_id);
  if (it == impl_->jobs.end()) return std::nullopt;
  return it->second;
}

int ApiService::port() const { return impl_->bound_port; }

}  // namespace artinsight
