#include "saelab/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "saelab/error.hpp"

namespace saelab::explain {

using nlohmann::json;

namespace {

bool digit_level(std::string_view s, int* level) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
  if (s.empty() || s.size() > 2) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  if (v > 10) return false;
  *level = v;
  return true;
}

const char* task_name(Task task) {
  switch (task) {
    case Task::kExplain: return "explain";
    case Task::kTokenSimulation: return "token_simulation";
    case Task::kAllAtOnce: return "all_at_once";
    case Task::kSegmentSimulation: return "segment_simulation";
    case Task::kSpScore: return "spscore";
  }
  return "unknown";
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  require(scheme_end != std::string::npos, "backend url needs a scheme: " + config_.url);
  const std::string scheme = config_.url.substr(0, scheme_end);
  require(scheme == "http" || scheme == "https", "backend url scheme must be http or https");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") {
    fail(ErrorCode::kUnsupportedBackend, "this build has no TLS support; use an http url");
  }
#endif
  const auto path_start = config_.url.find('/', scheme_end + 3);
  origin_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

std::string HttpBackend::request_body(const CompletionRequest& request) const {
  json body;
  body["model"] = config_.model;
  body["messages"] = json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  if (request.want_logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = 20;
  }
  if (config_.max_tokens > 0) body["max_tokens"] = config_.max_tokens;
  return body.dump();
}

Completion HttpBackend::parse_response(const std::string& body, bool want_logprobs) {
  Completion out;
  try {
    const auto j = json::parse(body);
    const auto& choice = j.at("choices").at(0);
    out.text = choice.at("message").at("content").get<std::string>();
    if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
      out.completion_tokens = usage->value("completion_tokens", 0L);
      out.prompt_tokens = usage->value("prompt_tokens", 0L);
    }
    if (!want_logprobs) return out;
    auto lp = choice.find("logprobs");
    if (lp == choice.end() || !lp->is_object() || !lp->contains("content")) return out;
    std::vector<SlotLogprobs> slots;
    std::string generated;
    for (const auto& entry : lp->at("content")) {
      const auto token = entry.at("token").get<std::string>();
      int level = 0;
      const bool after_tab = !generated.empty() && generated.back() == '\t';
      if ((after_tab || (!token.empty() && token.front() == '\t')) && digit_level(token, &level)) {
        SlotLogprobs slot;
        if (auto top = entry.find("top_logprobs"); top != entry.end() && !top->empty()) {
          for (const auto& cand : *top) {
            slot.candidates.emplace_back(cand.at("token").get<std::string>(),
                                         cand.at("logprob").get<double>());
          }
        } else {
          slot.candidates.emplace_back(token, entry.at("logprob").get<double>());
        }
        slots.push_back(std::move(slot));
      }
      generated += token;
    }
    out.logprobs = std::move(slots);
  } catch (const json::exception& e) {
    throw BackendError(1, std::string("malformed backend response: ") + e.what());
  }
  return out;
}

Completion HttpBackend::complete(const CompletionRequest& request) {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers{{"X-Saelab-Task", task_name(request.task)}};
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  auto res = client.Post(path_, headers, request_body(request), "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("server returned status " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw BackendError(1, "server returned status " + std::to_string(res->status) + ": " +
                              res->body.substr(0, 200));
  }
  return parse_response(res->body, request.want_logprobs);
}

}  // namespace saelab::explain
