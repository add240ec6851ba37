#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace saelab::explain {

struct Message {
  std::string role;
  std::string content;
};

enum class Task { kExplain, kTokenSimulation, kAllAtOnce, kSegmentSimulation, kSpScore };

struct CompletionRequest {
  std::vector<Message> messages;
  // Not sent on the wire; lets test doubles answer without sniffing prompts.
  Task task = Task::kTokenSimulation;
  bool want_logprobs = false;
};

// Candidate tokens and log-probabilities for one "unknown" slot.
struct SlotLogprobs {
  std::vector<std::pair<std::string, double>> candidates;
};

struct Completion {
  std::string text;
  long prompt_tokens = 0;
  // Reasoning plus visible output tokens.
  long completion_tokens = 0;
  std::optional<std::vector<SlotLogprobs>> logprobs;
};

// Retryable failure: connection errors, timeouts, 429 and 5xx responses.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
  virtual bool supports_logprobs() const = 0;
  virtual std::string model_name() const = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds backoff{0};
};

struct CallResult {
  Completion completion;
  int attempts = 0;
};

// Calls the backend until success or max_retries retries are used; throws
// BackendError carrying the attempt count.
CallResult complete_with_retry(Backend& backend, const CompletionRequest& request,
                               const RetryPolicy& policy);

// Word pieces and single punctuation marks; a stand-in for a real tokenizer.
long count_tokens(const std::string& text);

struct MockRules {
  // Substring -> level 0..10; a text's level is the maximum over matches.
  std::vector<std::pair<std::string, int>> levels;
  int default_level = 0;
  // Synthetic reasoning cost per judged item (token or segment).
  int reasoning_per_item = 4;
  int reasoning_fixed = 32;
  std::string explanation = "mentions of the configured keywords";
  int sp_score = 1;
  // Raw SpScore reply override, for exercising the parser.
  std::optional<std::string> sp_response;
  // Number of leading calls that fail with a transport error.
  int fail_first = 0;
  bool logprobs = true;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  std::string url;
  std::string model = "mock";
  std::string api_key_env;
  int timeout_ms = 60000;
  RetryPolicy retry;
  std::size_t max_in_flight = 8;
  bool logprobs = false;
  int max_tokens = 0;  // 0 leaves it to the server
  MockRules mock;
};

BackendConfig parse_backend_config(const std::string& json_text);
BackendConfig load_backend_config(const std::filesystem::path& path);

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

}  // namespace saelab::explain
