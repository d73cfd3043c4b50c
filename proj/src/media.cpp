#include "artinsight/media.hpp"

#include <algorithm>
#include <cstring>

namespace artinsight {

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (static_cast<std::uint32_t>(b[at]) << 24) | (static_cast<std::uint32_t>(b[at + 1]) << 16) |
         (static_cast<std::uint32_t>(b[at + 2]) << 8) | static_cast<std::uint32_t>(b[at + 3]);
}

bool has_tag(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  auto n = std::strlen(tag);
  return b.size() >= at + n && std::memcmp(b.data() + at, tag, n) == 0;
}

bool looks_like_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  // signature + IHDR chunk (25 bytes) + IEND chunk (12 bytes)
  if (b.size() < 8 + 25 + 12) return false;
  if (!std::equal(std::begin(kSig), std::end(kSig), b.begin())) return false;
  if (be32(b, 8) != 13 || !has_tag(b, 12, "IHDR")) return false;
  if (be32(b, 16) == 0 || be32(b, 20) == 0) return false;  // width, height
  // Walk chunks to IEND so truncated files are rejected.
  std::size_t at = 8;
  while (at + 12 <= b.size()) {
    std::uint64_t len = be32(b, at);
    if (has_tag(b, at + 4, "IEND")) return at + 12 == b.size() && len == 0;
    at += 12 + len;
  }
  return false;
}

bool looks_like_jpeg(std::span<const std::uint8_t> b) {
  if (b.size() < 4 || b[0] != 0xFF || b[1] != 0xD8 || b[2] != 0xFF) return false;
  std::size_t end = b.size();
  while (end > 2 && b[end - 1] == 0x00) --end;
  return end >= 4 && b[end - 2] == 0xFF && b[end - 1] == 0xD9;
}

}  // namespace

std::optional<ImageFormat> detect_image(std::span<const std::uint8_t> bytes) {
  if (looks_like_png(bytes)) return ImageFormat::png;
  if (looks_like_jpeg(bytes)) return ImageFormat::jpeg;
  return std::nullopt;
}

std::string_view media_type(ImageFormat format) noexcept {
  return format == ImageFormat::png ? "image/png" : "image/jpeg";
}

std::optional<AudioFormat> detect_audio(std::span<const std::uint8_t> b) {
  if (has_tag(b, 0, "RIFF") && has_tag(b, 8, "WAVE")) return AudioFormat::wav;
  if (b.size() >= 4 && b[0] == 0x1A && b[1] == 0x45 && b[2] == 0xDF && b[3] == 0xA3) {
    return AudioFormat::webm;
  }
  if (has_tag(b, 0, "OggS") && has_tag(b, 28, "OpusHead")) return AudioFormat::ogg_opus;
  if (has_tag(b, 0, "ID3")) return AudioFormat::mp3;
  if (b.size() >= 2 && b[0] == 0xFF && (b[1] & 0xE0) == 0xE0) return AudioFormat::mp3;
  return std::nullopt;
}

std::string_view media_type(AudioFormat format) noexcept {
  switch (format) {
    case AudioFormat::wav:
      return "audio/wav";
    case AudioFormat::webm:
      return "audio/webm";
    case AudioFormat::ogg_opus:
      return "audio/ogg";
    case AudioFormat::mp3:
      return "audio/mpeg";
  }
  return "application/octet-stream";
}

std::optional<std::int64_t> wav_duration_ms(std::span<const std::uint8_t> b) {
  if (!(has_tag(b, 0, "RIFF") && has_tag(b, 8, "WAVE"))) return std::nullopt;
  std::uint32_t byte_rate = 0;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    std::uint32_t len = le32(b, at + 4);
    if (has_tag(b, at, "fmt ") && len >= 16 && at + 8 + 16 <= b.size()) {
      byte_rate = le32(b, at + 8 + 8);
    } else if (has_tag(b, at, "data")) {
      if (byte_rate == 0) return std::nullopt;
      std::uint64_t available = b.size() - (at + 8);
      std::uint64_t data = std::min<std::uint64_t>(len, available);
      return static_cast<std::int64_t>(data * 1000 / byte_rate);
    }
    at += 8 + len + (len & 1);
  }
  return std::nullopt;
}

}  // namespace artinsight
