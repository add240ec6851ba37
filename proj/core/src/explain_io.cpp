#include "saelab/explain_io.hpp"

#include <sstream>

#include "saelab/error.hpp"

namespace saelab::explain {

using nlohmann::json;

namespace {

template <typename Fn>
auto parse_lines(std::string_view text, const char* what, Fn&& fn) {
  std::vector<decltype(fn(json()))> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(fn(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidInput,
           std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

json to_json(const ExplanationRecord& r) {
  return json{{"layer", r.explanation.neuron.layer},
              {"index", r.explanation.neuron.index},
              {"explanation", r.explanation.text},
              {"explainer_model", r.explanation.explainer_model},
              {"created_at", r.explanation.created_at},
              {"max_activation", r.max_activation},
              {"safety_tags", r.safety_tags},
              {"freq_by_concept", r.freq_by_concept}};
}

ExplanationRecord explanation_from_json(const json& j) {
  ExplanationRecord r;
  r.explanation.neuron = NeuronId{j.at("layer").get<int>(), j.at("index").get<std::uint32_t>()};
  r.explanation.text = j.at("explanation").get<std::string>();
  require(!r.explanation.text.empty(), "explanation text must not be empty");
  r.explanation.explainer_model = j.value("explainer_model", "");
  r.explanation.created_at = j.value("created_at", "");
  r.max_activation = j.value("max_activation", 0.0);
  r.safety_tags = j.value("safety_tags", std::vector<std::string>{});
  r.freq_by_concept = j.value("freq_by_concept", std::map<std::string, double>{});
  return r;
}

std::vector<ExplanationRecord> parse_explanations(std::string_view jsonl) {
  return parse_lines(jsonl, "explanation", explanation_from_json);
}

json to_json(const SimulationRun& run, bool with_series) {
  json j{{"layer", run.neuron.layer},
         {"index", run.neuron.index},
         {"method", method_name(run.method)},
         {"aggregation", run.aggregation == Aggregation::kPooled ? "pooled" : "per_example_mean"},
         {"corr_score", run.corr_score},
         {"corr_defined", run.corr_defined},
         {"kendall_tau", run.kendall_tau},
         {"tau_defined", run.tau_defined},
         {"generated_tokens", run.generated_tokens},
         {"prompt_tokens", run.prompt_tokens},
         {"calls", run.calls},
         {"attempts", run.attempts},
         {"warnings", run.warnings}};
  if (with_series) {
    json queries = json::array();
    for (const auto& q : run.queries) {
      queries.push_back({{"query_id", q.query_id},
                         {"predicted", q.predicted},
                         {"actual", q.actual},
                         {"prompt_tokens", q.prompt_tokens},
                         {"completion_tokens", q.completion_tokens},
                         {"attempts", q.attempts},
                         {"warnings", q.report.warnings}});
    }
    j["queries"] = std::move(queries);
  }
  return j;
}

SimulationRun run_from_json(const json& j) {
  SimulationRun run;
  run.neuron = NeuronId{j.at("layer").get<int>(), j.at("index").get<std::uint32_t>()};
  run.method = parse_method(j.at("method").get<std::string>());
  run.aggregation = j.value("aggregation", "pooled") == "pooled" ? Aggregation::kPooled
                                                                 : Aggregation::kPerExampleMean;
  run.generated_tokens = j.value("generated_tokens", 0L);
  run.prompt_tokens = j.value("prompt_tokens", 0L);
  run.calls = j.value("calls", 0);
  run.attempts = j.value("attempts", 0);
  run.warnings = j.value("warnings", 0);
  if (auto it = j.find("queries"); it != j.end()) {
    for (const auto& q : *it) {
      QueryResult r;
      r.query_id = q.at("query_id").get<std::string>();
      r.predicted = q.at("predicted").get<std::vector<double>>();
      r.actual = q.at("actual").get<std::vector<double>>();
      r.prompt_tokens = q.value("prompt_tokens", 0L);
      r.completion_tokens = q.value("completion_tokens", 0L);
      r.attempts = q.value("attempts", 0);
      r.report.warnings = q.value("warnings", 0);
      run.queries.push_back(std::move(r));
    }
    score_run(run);
  } else {
    run.corr_score = j.at("corr_score").get<double>();
    run.corr_defined = j.value("corr_defined", true);
    run.kendall_tau = j.value("kendall_tau", 0.0);
    run.tau_defined = j.value("tau_defined", true);
  }
  run.validate();
  return run;
}

std::vector<SimulationRun> parse_runs(std::string_view jsonl) {
  return parse_lines(jsonl, "simulation run", run_from_json);
}

json to_json(const SpScoreResult& r) {
  return json{{"layer", r.neuron.layer},   {"index", r.neuron.index},
              {"sp_score", r.score},       {"clamped", r.clamped},
              {"attempts", r.attempts},    {"generated_tokens", r.generated_tokens},
              {"raw_response", r.raw_response}};
}

json to_json(const CostReport& report) {
  json methods = json::array();
  for (const auto& m : report.methods) {
    methods.push_back({{"method", method_name(m.method)},
                       {"runs", m.runs},
                       {"mean_generated_tokens", m.mean_generated_tokens},
                       {"mean_prompt_tokens", m.mean_prompt_tokens},
                       {"mean_total_tokens", m.mean_total_tokens}});
  }
  json j{{"methods", methods}};
  j["savings"] = report.savings ? json(*report.savings) : json(nullptr);
  j["savings_total"] = report.savings_total ? json(*report.savings_total) : json(nullptr);
  return j;
}

}  // namespace saelab::explain
