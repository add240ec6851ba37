#include "saelab/backend.hpp"

#include <cctype>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"
#include "saelab/http_backend.hpp"
#include "saelab/mock_backend.hpp"

namespace saelab::explain {

using nlohmann::json;

CallResult complete_with_retry(Backend& backend, const CompletionRequest& request,
                               const RetryPolicy& policy) {
  require(policy.max_retries >= 0, "max_retries must be non-negative");
  CallResult result;
  std::string last_error;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    result.attempts = attempt + 1;
    try {
      result.completion = backend.complete(request);
      return result;
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (attempt < policy.max_retries && policy.backoff.count() > 0) {
      std::this_thread::sleep_for(policy.backoff * (1 << std::min(attempt, 6)));
    }
  }
  throw BackendError(result.attempts, "backend call failed after " +
                                          std::to_string(result.attempts) +
                                          " attempts: " + last_error);
}

long count_tokens(const std::string& text) {
  constexpr std::size_t kPieceLength = 6;
  long count = 0;
  std::size_t run = 0;
  auto flush = [&] {
    if (run) count += static_cast<long>((run + kPieceLength - 1) / kPieceLength);
    run = 0;
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      ++run;
      continue;
    }
    flush();
    if (!std::isspace(c)) ++count;
  }
  flush();
  return count;
}

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    require(known.count(it.key()) > 0, "unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

MockRules parse_mock(const json& j) {
  require(j.is_object(), "backend 'mock' must be an object");
  reject_unknown_keys(j,
                      {"levels", "default_level", "reasoning_per_item", "reasoning_fixed",
                       "explanation", "sp_score", "sp_response", "fail_first", "logprobs"},
                      "mock backend config");
  MockRules rules;
  if (auto it = j.find("levels"); it != j.end()) {
    require(it->is_object(), "mock levels must map substrings to levels");
    for (auto lv = it->begin(); lv != it->end(); ++lv) {
      rules.levels.emplace_back(lv.key(), lv->get<int>());
    }
  }
  read_opt(j, "default_level", rules.default_level);
  read_opt(j, "reasoning_per_item", rules.reasoning_per_item);
  read_opt(j, "reasoning_fixed", rules.reasoning_fixed);
  read_opt(j, "explanation", rules.explanation);
  read_opt(j, "sp_score", rules.sp_score);
  if (auto it = j.find("sp_response"); it != j.end()) rules.sp_response = it->get<std::string>();
  read_opt(j, "fail_first", rules.fail_first);
  read_opt(j, "logprobs", rules.logprobs);
  return rules;
}

}  // namespace

BackendConfig parse_backend_config(const std::string& json_text) {
  BackendConfig config;
  try {
    const auto j = json::parse(json_text);
    require(j.is_object(), "backend config must be a JSON object");
    reject_unknown_keys(j,
                        {"kind", "url", "model", "api_key_env", "timeout_ms", "max_retries",
                         "retry_backoff_ms", "max_in_flight", "logprobs", "max_tokens", "mock"},
                        "backend config");
    read_opt(j, "kind", config.kind);
    read_opt(j, "url", config.url);
    read_opt(j, "model", config.model);
    read_opt(j, "api_key_env", config.api_key_env);
    read_opt(j, "timeout_ms", config.timeout_ms);
    read_opt(j, "max_retries", config.retry.max_retries);
    int backoff = 0;
    read_opt(j, "retry_backoff_ms", backoff);
    config.retry.backoff = std::chrono::milliseconds(backoff);
    read_opt(j, "max_in_flight", config.max_in_flight);
    read_opt(j, "logprobs", config.logprobs);
    read_opt(j, "max_tokens", config.max_tokens);
    if (auto it = j.find("mock"); it != j.end()) config.mock = parse_mock(*it);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, std::string("backend config: ") + e.what());
  }
  require(config.kind == "mock" || config.kind == "http",
          "backend kind must be 'mock' or 'http'");
  require(config.kind != "http" || !config.url.empty(), "http backend needs a url");
  require(config.timeout_ms > 0, "timeout_ms must be positive");
  require(config.retry.max_retries >= 0, "max_retries must be non-negative");
  require(config.max_in_flight >= 1, "max_in_flight must be at least 1");
  return config;
}

BackendConfig load_backend_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path.string());
  return parse_backend_config(std::string(bytes.begin(), bytes.end()));
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  if (config.kind == "http") return std::make_unique<HttpBackend>(config);
  return std::make_unique<MockBackend>(config.mock);
}

}  // namespace saelab::explain
