#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "saelab/explain_sim.hpp"

namespace saelab::explain {

// An explanation plus what the database needs to know about its neuron.
struct ExplanationRecord {
  Explanation explanation;
  double max_activation = 0.0;
  std::vector<std::string> safety_tags;
  std::map<std::string, double> freq_by_concept;
};

nlohmann::json to_json(const ExplanationRecord& record);
ExplanationRecord explanation_from_json(const nlohmann::json& j);
std::vector<ExplanationRecord> parse_explanations(std::string_view jsonl);

// Per-query detail is omitted unless with_series is set.
nlohmann::json to_json(const SimulationRun& run, bool with_series = true);
SimulationRun run_from_json(const nlohmann::json& j);
std::vector<SimulationRun> parse_runs(std::string_view jsonl);

nlohmann::json to_json(const SpScoreResult& result);
nlohmann::json to_json(const CostReport& report);

}  // namespace saelab::explain
