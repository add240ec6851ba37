#include "saelab/mock_backend.hpp"

#include <algorithm>
#include <sstream>

#include "saelab/prompts.hpp"

namespace saelab::explain {

int MockBackend::level_for(const std::string& text) const {
  int level = rules_.default_level;
  for (const auto& [needle, value] : rules_.levels) {
    if (!needle.empty() && text.find(needle) != std::string::npos) level = std::max(level, value);
  }
  return std::clamp(level, 0, 10);
}

Completion MockBackend::complete(const CompletionRequest& request) {
  const long call = ++calls_;
  if (call <= rules_.fail_first) throw TransportError("mock transient failure");

  const std::string user = request.messages.empty() ? std::string() : request.messages.back().content;
  Completion out;
  for (const auto& m : request.messages) out.prompt_tokens += count_tokens(m.content);
  long items = 0;
  std::ostringstream text;

  switch (request.task) {
    case Task::kTokenSimulation:
    case Task::kAllAtOnce: {
      const auto tokens = parse_unknown_lines(user);
      items = static_cast<long>(tokens.size());
      std::vector<SlotLogprobs> slots;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const int level = level_for(tokens[i]);
        if (i) text << '\n';
        text << escape_token(tokens[i]) << '\t' << level;
        slots.push_back(SlotLogprobs{{{std::to_string(level), 0.0}}});
      }
      if (request.want_logprobs && rules_.logprobs) out.logprobs = std::move(slots);
      break;
    }
    case Task::kSegmentSimulation: {
      const auto segments = parse_segment_lines(user);
      items = static_cast<long>(segments.size());
      for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i) text << '\n';
        text << "Segment " << (i + 1) << ": "
             << (level_for(segments[i]) > 0 ? "activate" : "non-activate");
      }
      break;
    }
    case Task::kExplain:
      text << rules_.explanation;
      break;
    case Task::kSpScore:
      if (rules_.sp_response) {
        text << *rules_.sp_response;
      } else {
        text << "```json {\"score\": " << rules_.sp_score << "}```";
      }
      break;
  }
  out.text = text.str();
  out.completion_tokens =
      rules_.reasoning_fixed + rules_.reasoning_per_item * items + count_tokens(out.text);
  return out;
}

}  // namespace saelab::explain
