#pragma once

#include <atomic>
#include <string>

#include "saelab/backend.hpp"

namespace saelab::explain {

// Deterministic backend driven by substring rules. It parses the rendered
// prompts, so it doubles as a check that prompts carry what they should.
class MockBackend : public Backend {
 public:
  explicit MockBackend(MockRules rules) : rules_(std::move(rules)) {}

  Completion complete(const CompletionRequest& request) override;
  bool supports_logprobs() const override { return rules_.logprobs; }
  std::string model_name() const override { return "mock"; }

  int level_for(const std::string& text) const;
  long calls() const noexcept { return calls_.load(); }

 private:
  MockRules rules_;
  std::atomic<long> calls_{0};
};

}  // namespace saelab::explain
