#include "saelab/prompts.hpp"

#include <sstream>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"
#include "saelab_prompt_data.hpp"

namespace saelab::explain {

namespace {

std::string strip_final_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::string_view lines_after(std::string_view text, std::string_view header) {
  const auto pos = text.find(header);
  require(pos != std::string_view::npos,
          "prompt is missing the section " + std::string(header.substr(0, header.size() - 1)));
  return text.substr(pos + header.size());
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    out.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return out;
}

}  // namespace

PromptTemplate parse_template(std::string_view text) {
  PromptTemplate out;
  std::string* current = nullptr;
  bool seen_system = false;
  bool seen_user = false;
  for (auto line : split_lines(text)) {
    if (line == "--- system") {
      current = &out.system;
      seen_system = true;
      continue;
    }
    if (line == "--- user") {
      current = &out.user;
      seen_user = true;
      continue;
    }
    require(current != nullptr, "prompt template text before the first section marker");
    current->append(line);
    current->push_back('\n');
  }
  require(seen_system && seen_user, "prompt template needs system and user sections");
  out.system = strip_final_newline(std::move(out.system));
  out.user = strip_final_newline(std::move(out.user));
  return out;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path.string());
  return parse_template(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

const PromptTemplate& builtin_template(TemplateId id) {
  static const PromptTemplate explanation = parse_template(prompt_data::kExplanation);
  static const PromptTemplate token = parse_template(prompt_data::kTokenSimulation);
  static const PromptTemplate segment = parse_template(prompt_data::kSegmentSimulation);
  static const PromptTemplate spscore = parse_template(prompt_data::kSpScore);
  switch (id) {
    case TemplateId::kExplanation: return explanation;
    case TemplateId::kTokenSimulation: return token;
    case TemplateId::kSegmentSimulation: return segment;
    case TemplateId::kSpScore: return spscore;
  }
  fail(ErrorCode::kInvalidInput, "unknown template id");
}

std::string fill(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto open = text.find("{{", i);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(i, open - i));
    const std::string key(text.substr(open + 2, close - open - 2));
    if (auto it = vars.find(key); it != vars.end()) {
      out += it->second;
    } else {
      out.append(text.substr(open, close + 2 - open));
    }
    i = close + 2;
  }
  out.append(text.substr(i));
  return out;
}

std::string escape_token(std::string_view token) {
  std::string out;
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_token(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\' || i + 1 == text.size()) {
      out.push_back(text[i]);
      continue;
    }
    switch (text[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case '\\': out.push_back('\\'); break;
      default:
        out.push_back('\\');
        out.push_back(text[i]);
    }
  }
  return out;
}

std::string render_unknown_lines(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += escape_token(t);
    out.push_back('\t');
    out += kUnknownSlot;
    out.push_back('\n');
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_segment_lines(const std::vector<std::string>& contents) {
  std::ostringstream out;
  for (std::size_t i = 0; i < contents.size(); ++i) {
    if (i) out << '\n';
    out << "Segment " << (i + 1) << ": " << escape_token(contents[i]);
  }
  return out.str();
}

std::vector<std::string> parse_unknown_lines(std::string_view user_prompt) {
  std::vector<std::string> tokens;
  const std::string suffix = "\t" + std::string(kUnknownSlot);
  for (auto line : split_lines(lines_after(user_prompt, kActivationsHeader))) {
    if (line.size() < suffix.size() || line.substr(line.size() - suffix.size()) != suffix) break;
    tokens.push_back(unescape_token(line.substr(0, line.size() - suffix.size())));
  }
  return tokens;
}

std::vector<std::string> parse_segment_lines(std::string_view user_prompt) {
  std::vector<std::string> contents;
  for (auto line : split_lines(lines_after(user_prompt, kSentenceHeader))) {
    const std::string prefix = "Segment " + std::to_string(contents.size() + 1) + ": ";
    if (line.substr(0, prefix.size()) != prefix) break;
    contents.push_back(unescape_token(line.substr(prefix.size())));
  }
  return contents;
}

}  // namespace saelab::explain
