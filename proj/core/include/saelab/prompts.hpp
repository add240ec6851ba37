#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace saelab::explain {

// Template files hold a "--- system" section and a "--- user" section.
// Placeholders look like {{name}}.
struct PromptTemplate {
  std::string system;
  std::string user;
};

enum class TemplateId { kExplanation, kTokenSimulation, kSegmentSimulation, kSpScore };

PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template(const std::filesystem::path& path);
// Templates compiled into the library from core/prompts.
const PromptTemplate& builtin_template(TemplateId id);

// Replaces every {{key}}; unknown placeholders are left as they are.
std::string fill(std::string_view text, const std::map<std::string, std::string>& vars);

// Makes a token safe to place on one tab-separated line and back.
std::string escape_token(std::string_view token);
std::string unescape_token(std::string_view text);

inline constexpr std::string_view kUnknownSlot = "unknown";
inline constexpr std::string_view kActivationsHeader = "[Activations]:\n";
inline constexpr std::string_view kSentenceHeader = "[Sentence]:\n";

// "token<TAB>unknown" lines, one per token.
std::string render_unknown_lines(const std::vector<std::string>& tokens);
// "Segment i: content" lines, 1-based.
std::string render_segment_lines(const std::vector<std::string>& contents);

// Inverse of the renderers, applied to a filled user prompt.
std::vector<std::string> parse_unknown_lines(std::string_view user_prompt);
std::vector<std::string> parse_segment_lines(std::string_view user_prompt);

}  // namespace saelab::explain
