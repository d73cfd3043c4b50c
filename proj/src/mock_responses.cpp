#include "artinsight/mock_responses.hpp"

#include <array>

#include <fmt/format.h>

#include "artinsight/prompts.hpp"

namespace artinsight {

namespace {

constexpr std::array<std::string_view, 6> kPalettes = {
    "bright red, sunny yellow and sky blue", "deep purple and emerald green",
    "soft pinks and pale oranges",           "black outlines filled with crayon blue",
    "earthy browns and leaf greens",         "rainbow stripes of every color"};

constexpr std::array<std::string_view, 6> kSubjects = {
    "a round-faced figure with stick arms", "a house with a pointed roof",
    "a large scribbled sun",                "a row of wavy lines like water",
    "a tall tree with looping branches",    "a cluster of overlapping circles"};

std::string system_text(const ProviderRequest& request) {
  std::string out;
  for (const auto& part : request.parts) {
    if (part.role != Role::system) continue;
    if (const auto* s = std::get_if<std::string>(&part.content)) out += *s;
  }
  return out;
}

std::optional<std::string> transcript_of(const std::string& system) {
  auto pos = system.find(kTranscriptPreamble);
  if (pos == std::string::npos) return std::nullopt;
  return system.substr(pos + kTranscriptPreamble.size());
}

std::string describe(const ProviderRequest& request) {
  const std::string hash = request_hash(request);
  const auto pick = [&](std::size_t offset, std::size_t mod) {
    return std::stoul(hash.substr(offset, 4), nullptr, 16) % mod;
  };
  const auto palette = kPalettes[pick(0, kPalettes.size())];
  const auto subject = kSubjects[pick(4, kSubjects.size())];
  const auto transcript = transcript_of(system_text(request));

  std::string descriptive = fmt::format(
      "The artwork is drawn on white paper. Near the center there is {}. The colors are {}, "
      "applied in energetic strokes that overlap at the edges. The lower part of the page is "
      "left mostly empty.",
      subject, palette);
  std::string creative = fmt::format(
      "Imagine the page humming with {}. In the middle, {} seems to wave hello, as if it has "
      "just stepped into the world.",
      palette, subject);
  if (transcript) {
    descriptive += fmt::format(" The artist explains it this way: \"{}\"", *transcript);
    creative += fmt::format(" In the artist's own words: \"{}\"", *transcript);
  }
  Json out{{"title", transcript ? "The artist's story" : "A colorful drawing"},
           {"descriptive", descriptive},
           {"creative", creative},
           {"questions",
            {"What were you thinking about while you made this?",
             fmt::format("Why did you choose {}?", palette),
             "What would you add if you kept drawing?"}}};
  return out.dump();
}

std::string judge() {
  Json out{{"presumptive", 4}, {"reductive", 4},       {"detail", 4},
           {"coverage", 4},    {"misc_subtraction", 0}, {"total", 16},
           {"rationale", Json::object()}};
  return out.dump();
}

}  // namespace

bool is_judge_request(const ProviderRequest& request) {
  return system_text(request).starts_with("You are the LLM Scorer");
}

MockProvider::Responder synthetic_responder() {
  return [](const ProviderRequest& request) {
    return is_judge_request(request) ? judge() : describe(request);
  };
}

}  // namespace artinsight
