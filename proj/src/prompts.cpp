#include "artinsight/prompts.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "artinsight/hashing.hpp"
#include "canonical_prompts.hpp"

namespace artinsight {

namespace fs = std::filesystem;

namespace {

std::string read_exact(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const PromptBundle& PromptBundle::canonical() {
  static const PromptBundle bundle = [] {
    PromptBundle b;
    b.descriptive_instructions = std::string(embedded::kDescriptive);
    b.creative_addendum = std::string(embedded::kCreative);
    b.questions_addendum = std::string(embedded::kQuestions);
    b.title_addendum = std::string(embedded::kTitle);
    b.structure_addendum = std::string(embedded::kStructure);
    b.revision = b.compute_revision();
    return b;
  }();
  return bundle;
}

PromptBundle PromptBundle::load(const fs::path& dir) {
  PromptBundle b;
  b.descriptive_instructions = read_exact(dir / "descriptive.txt");
  b.creative_addendum = read_exact(dir / "creative.txt");
  b.questions_addendum = read_exact(dir / "questions.txt");
  b.title_addendum = read_exact(dir / "title.txt");
  b.structure_addendum = read_exact(dir / "structure.txt");
  b.revision = b.compute_revision();
  return b;
}

std::string PromptBundle::compute_revision() const {
  std::string joined;
  for (const auto* block : {&descriptive_instructions, &creative_addendum, &questions_addendum,
                            &title_addendum, &structure_addendum}) {
    joined += *block;
    joined.push_back('\0');
  }
  return "sha256:" + sha256_hex(joined);
}

bool PromptBundle::matches_canonical() const {
  const auto& c = canonical();
  return descriptive_instructions == c.descriptive_instructions &&
         creative_addendum == c.creative_addendum && questions_addendum == c.questions_addendum;
}

std::optional<ValidationIssue> validate_bundle(const PromptBundle& b) {
  const std::pair<const char*, const std::string*> blocks[] = {
      {"descriptive_instructions", &b.descriptive_instructions},
      {"creative_addendum", &b.creative_addendum},
      {"questions_addendum", &b.questions_addendum},
      {"title_addendum", &b.title_addendum},
      {"structure_addendum", &b.structure_addendum},
  };
  for (auto [name, text] : blocks) {
    if (text->empty()) return ValidationIssue{ErrorCode::invalid_value, name, "empty block"};
  }
  if (b.revision != b.compute_revision()) {
    return ValidationIssue{ErrorCode::invalid_value, "revision",
                           "revision does not match block contents"};
  }
  return std::nullopt;
}

std::string assemble_prompt(const PromptBundle& b, std::optional<std::string_view> transcript) {
  std::string out;
  for (const auto* block : {&b.descriptive_instructions, &b.creative_addendum,
                            &b.questions_addendum, &b.title_addendum, &b.structure_addendum}) {
    if (!out.empty()) out += kBlockSeparator;
    out += *block;
  }
  if (transcript) {
    out += kBlockSeparator;
    out += kTranscriptPreamble;
    out += *transcript;
  }
  return out;
}

}  // namespace artinsight
