#include "artinsight/transcription.hpp"

#include <cctype>

#include <fmt/format.h>

namespace artinsight {

void MockTranscriber::script(const BlobRef& audio_ref, std::string transcript) {
  std::lock_guard lock(mu_);
  scripted_[audio_ref.value] = std::move(transcript);
}

std::string MockTranscriber::recognize(std::span<const std::uint8_t> audio, AudioFormat,
                                       const std::string&) {
  std::lock_guard lock(mu_);
  ++calls_;
  auto it = scripted_.find(blob_ref_for(audio).value);
  return it == scripted_.end() ? fallback_ : it->second;
}

void MockTranscriber::set_fallback(std::string transcript) {
  std::lock_guard lock(mu_);
  fallback_ = std::move(transcript);
}

std::size_t MockTranscriber::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

HttpTranscriber::HttpTranscriber(std::string base_url, ApiCredentials credentials,
                                 std::shared_ptr<HttpTransport> transport, std::string model)
    : base_url_(std::move(base_url)),
      credentials_(std::move(credentials)),
      transport_(std::move(transport)),
      model_(std::move(model)) {}

std::string HttpTranscriber::recognize(std::span<const std::uint8_t> audio, AudioFormat format,
                                       const std::string& language_tag) {
  const std::string boundary = "----artinsight-" + sha256_hex(audio).substr(0, 24);
  std::string language = language_tag.substr(0, language_tag.find('-'));
  std::string body;
  auto field = [&](const std::string& name, const std::string& value) {
    body += fmt::format("--{}\r\nContent-Disposition: form-data; name=\"{}\"\r\n\r\n{}\r\n",
                        boundary, name, value);
  };
  field("model", model_);
  if (!language.empty()) field("language", language);
  body += fmt::format(
      "--{}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"clip\"\r\n"
      "Content-Type: {}\r\n\r\n",
      boundary, media_type(format));
  body.append(reinterpret_cast<const char*>(audio.data()), audio.size());
  body += fmt::format("\r\n--{}--\r\n", boundary);

  HttpRequest http;
  http.url = base_url_ + "/audio/transcriptions";
  http.headers = {{"Authorization", "Bearer " + credentials_.resolve()}};
  http.body = std::move(body);
  http.content_type = "multipart/form-data; boundary=" + boundary;
  HttpResponse res = transport_->post(http);
  if (res.status < 200 || res.status >= 300) {
    throw ProviderFailure(ProviderFailure::classify_status(res.status),
                          fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 300)),
                          res.status);
  }
  Json doc = Json::parse(res.body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("text")) {
    throw ProviderFailure(ProviderFailure::Kind::terminal, "transcription response has no text");
  }
  return doc["text"].get<std::string>();
}

TranscriptionService::TranscriptionService(std::shared_ptr<Transcriber> backend,
                                           TranscriberConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (config_.transcriber_id.empty()) {
    throw Error(ErrorCode::invalid_value, "transcriber_id must be non-empty", "transcriber_id");
  }
  if (!backend_) throw Error(ErrorCode::invalid_value, "no transcriber backend", "backend");
  if (config_.max_concurrent < 1) config_.max_concurrent = 1;
}

AudioFormat TranscriptionService::check_format(std::span<const std::uint8_t> audio) const {
  auto format = detect_audio(audio);
  if (!format) throw Error(ErrorCode::unsupported_format, "unrecognized audio container", "audio");
  if (*format == AudioFormat::mp3 && !config_.allow_mp3) {
    throw Error(ErrorCode::unsupported_format, "MP3 uploads are disabled", "audio");
  }
  return *format;
}

AudioNote TranscriptionService::transcribe(const BlobReader& blobs, const BlobRef& audio_ref,
                                           std::optional<std::int64_t> declared_duration_ms) const {
  const Blob blob = blobs.get_blob(audio_ref);
  AudioFormat format = check_format(blob.bytes);

  std::optional<std::int64_t> duration =
      format == AudioFormat::wav ? wav_duration_ms(blob.bytes) : declared_duration_ms;
  if (!duration && declared_duration_ms) duration = declared_duration_ms;
  if (!duration || *duration <= 0) {
    throw Error(ErrorCode::invalid_value, "audio duration must be known and positive",
                "duration_ms");
  }

  std::string text;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < config_.max_concurrent; });
    ++in_flight_;
  }
  auto release = [&] {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  };
  try {
    text = backend_->recognize(blob.bytes, format, config_.language_tag);
    release();
  } catch (const std::exception& e) {
    release();
    throw Error(ErrorCode::service_error, e.what(), "audio");
  }

  auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    throw Error(ErrorCode::empty_transcript, "no speech recognized", "transcript");
  }
  text = text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);

  AudioNote note;
  note.audio_ref = audio_ref;
  note.media_type = std::string(media_type(format));
  note.duration_ms = *duration;
  note.transcript = std::move(text);
  note.transcriber_id = config_.transcriber_id;
  return note;
}

}  // namespace artinsight
