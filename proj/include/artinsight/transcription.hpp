#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "artinsight/blob_source.hpp"
#include "artinsight/domain.hpp"
#include "artinsight/gateway.hpp"
#include "artinsight/media.hpp"

namespace artinsight {

enum class TranscriberMode { external_service, mock };

struct TranscriberConfig {
  std::string transcriber_id = "mock-transcriber";
  std::string language_tag = "en-US";
  TranscriberMode mode = TranscriberMode::mock;
  bool allow_mp3 = false;
  int max_concurrent = 4;
};

/// Speech-to-text backend. Returns the raw (possibly empty) transcript.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string recognize(std::span<const std::uint8_t> audio, AudioFormat format,
                                const std::string& language_tag) = 0;
};

/// Scripted by blob ref ("sha256:..."); unknown clips transcribe to the
/// fallback, which is "" unless set.
class MockTranscriber : public Transcriber {
 public:
  void script(const BlobRef& audio_ref, std::string transcript);
  void set_fallback(std::string transcript);
  std::string recognize(std::span<const std::uint8_t> audio, AudioFormat format,
                        const std::string& language_tag) override;
  std::size_t call_count() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> scripted_;
  std::string fallback_;
  std::size_t calls_ = 0;
};

/// OpenAI-style multipart POST to <base_url>/audio/transcriptions.
class HttpTranscriber : public Transcriber {
 public:
  HttpTranscriber(std::string base_url, ApiCredentials credentials,
                  std::shared_ptr<HttpTransport> transport, std::string model = "whisper-1");
  std::string recognize(std::span<const std::uint8_t> audio, AudioFormat format,
                        const std::string& language_tag) override;

 private:
  std::string base_url_;
  ApiCredentials credentials_;
  std::shared_ptr<HttpTransport> transport_;
  std::string model_;
};

class TranscriptionService {
 public:
  TranscriptionService(std::shared_ptr<Transcriber> backend, TranscriberConfig config);

  /// Format is sniffed from the bytes. WAV duration is read from the header;
  /// other containers need `declared_duration_ms`. The blob is only read.
  /// Throws Error(unsupported_format | empty_transcript | service_error | invalid_value).
  AudioNote transcribe(const BlobReader& blobs, const BlobRef& audio_ref,
                       std::optional<std::int64_t> declared_duration_ms = std::nullopt) const;

  /// Sniffs and checks the format against the configuration without
  /// transcribing.
  AudioFormat check_format(std::span<const std::uint8_t> audio) const;

  const TranscriberConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<Transcriber> backend_;
  TranscriberConfig config_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  mutable int in_flight_ = 0;
};

}  // namespace artinsight
