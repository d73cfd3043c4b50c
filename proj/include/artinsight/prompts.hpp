#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "artinsight/domain.hpp"

namespace artinsight {

/// The instruction blocks sent with every analysis request.
struct PromptBundle {
  std::string descriptive_instructions;
  std::string creative_addendum;
  std::string questions_addendum;
  std::string title_addendum;
  std::string structure_addendum;
  // "sha256:<hex>" over the five blocks; see compute_revision().
  std::string revision;

  /// Bundle compiled in from data/prompts at build time.
  static const PromptBundle& canonical();
  /// Reads descriptive.txt, creative.txt, questions.txt, title.txt and
  /// structure.txt from `dir` byte for byte.
  static PromptBundle load(const std::filesystem::path& dir);

  std::string compute_revision() const;
  bool matches_canonical() const;

  bool operator==(const PromptBundle&) const = default;
};

std::optional<ValidationIssue> validate_bundle(const PromptBundle& bundle);

inline constexpr std::string_view kBlockSeparator = "\n\n";
inline constexpr std::string_view kTranscriptPreamble =
    "The child artist described this artwork in their own words. Honor and integrate this "
    "perspective: ";

/// Blocks in fixed order, then the transcript context block when given.
std::string assemble_prompt(const PromptBundle& bundle,
                            std::optional<std::string_view> transcript = std::nullopt);

}  // namespace artinsight
