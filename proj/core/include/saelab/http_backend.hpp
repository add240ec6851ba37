#pragma once

#include <string>

#include "saelab/backend.hpp"

namespace saelab::explain {

// OpenAI-style chat completions endpoint.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);

  Completion complete(const CompletionRequest& request) override;
  bool supports_logprobs() const override { return config_.logprobs; }
  std::string model_name() const override { return config_.model; }

  // Exposed for tests: request body and response decoding.
  std::string request_body(const CompletionRequest& request) const;
  static Completion parse_response(const std::string& body, bool want_logprobs);

 private:
  BackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace saelab::explain
