#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace artinsight {

enum class ImageFormat { png, jpeg };

/// Structural check of the container: PNG signature with IHDR first and IEND
/// last, or JPEG SOI ... EOI with a valid first marker.
std::optional<ImageFormat> detect_image(std::span<const std::uint8_t> bytes);
std::string_view media_type(ImageFormat format) noexcept;

enum class AudioFormat { wav, webm, ogg_opus, mp3 };

std::optional<AudioFormat> detect_audio(std::span<const std::uint8_t> bytes);
std::string_view media_type(AudioFormat format) noexcept;

/// Duration from a PCM WAV header; nullopt for other containers or bad headers.
std::optional<std::int64_t> wav_duration_ms(std::span<const std::uint8_t> bytes);

}  // namespace artinsight
