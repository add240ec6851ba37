#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saelab/backend.hpp"
#include "saelab/dataset.hpp"
#include "saelab/prompts.hpp"

namespace saelab::explain {

struct NeuronId {
  int layer = 0;
  std::uint32_t index = 0;

  auto operator<=>(const NeuronId&) const = default;
};

std::string to_string(NeuronId id);

struct ActivationExample {
  std::string query_id;
  std::vector<std::string> tokens;
  std::vector<double> activations;  // this neuron, one per token
  std::vector<int> token_bins;      // quantized against the dataset maximum
  int bin = 0;                      // max of token_bins

  void validate() const;
};

// round(levels * a / a_max); non-positive activations map to 0.
int quantize(double activation, double a_max, int levels = 10);

// Bins against the maximum of `activations`; throws kDeadNeuron if it is not positive.
std::vector<int> quantize_bins(std::span<const double> activations, int levels = 10);

// One example per query. `neuron_activations` holds this neuron's value for
// every dataset row.
std::vector<ActivationExample> build_examples(const ingest::ActivationDataset& dataset,
                                              std::span<const double> neuron_activations,
                                              int levels = 10);

// Up to per_bin examples from each bin, uniformly without replacement.
// Output is ordered by bin descending, then by input position.
std::vector<ActivationExample> sample_per_bin(std::span<const ActivationExample> examples,
                                              std::size_t per_bin, std::uint64_t seed);

struct RenderedPrompt {
  std::vector<Message> messages;
  std::vector<std::string> log;
};

RenderedPrompt build_explanation_prompt(
    std::span<const ActivationExample> samples, NeuronId neuron,
    const PromptTemplate& tmpl = builtin_template(TemplateId::kExplanation));

struct Explanation {
  NeuronId neuron;
  std::string text;
  std::string explainer_model;
  std::string created_at;
};

struct ExplainResult {
  Explanation explanation;
  std::vector<std::string> log;
  int attempts = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

ExplainResult explain_neuron(NeuronId neuron, std::span<const ActivationExample> samples,
                             Backend& backend, const RetryPolicy& retry);

enum class SimMethod { kAllAtOnce, kTokenLevel, kSegmentLevel };

const char* method_name(SimMethod method);
// Accepts "token", "segment", "all-at-once" and the underscore spellings.
SimMethod parse_method(std::string_view name);

struct ParseReport {
  int warnings = 0;
  int clamped = 0;
  int misaligned = 0;
  std::vector<std::string> notes;
};

std::vector<Message> token_simulation_messages(const std::string& explanation,
                                               const std::vector<std::string>& tokens);
std::vector<Message> segment_simulation_messages(const std::string& explanation,
                                                 const std::vector<std::string>& contents);
std::vector<Message> spscore_messages(const std::string& explanation);

// Reads "(token, N)" tuples or "token<TAB>N" lines aligned by position.
// Throws kSimulationParse when more than 20% of positions fail to align.
std::vector<double> parse_token_response(const std::string& text,
                                         const std::vector<std::string>& tokens,
                                         ParseReport* report);

// Expected level sum_v v * p(v) per slot, p renormalized over the digits 0..10.
std::vector<double> expected_levels(const std::vector<SlotLogprobs>& slots,
                                    std::size_t n_tokens, ParseReport* report);

std::vector<bool> parse_segment_response(const std::string& text, std::size_t n_segments,
                                         ParseReport* report);

struct Prediction {
  std::vector<double> values;  // levels, or 0/1 for segments
  ParseReport report;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  int attempts = 0;
};

Prediction simulate_token_level(const std::string& explanation,
                                const std::vector<std::string>& tokens, Backend& backend,
                                const RetryPolicy& retry);
Prediction simulate_all_at_once(const std::string& explanation,
                                const std::vector<std::string>& tokens, Backend& backend,
                                const RetryPolicy& retry);

using Segments = std::vector<std::vector<std::string>>;

// Contiguous balanced split, longer segments first.
Segments split_segments(const std::vector<std::string>& tokens, std::size_t n_segments);

Prediction simulate_segment_level(const std::string& explanation, const Segments& segments,
                                  Backend& backend, const RetryPolicy& retry);

// True iff some token of the segment has activation > epsilon.
std::vector<bool> actual_segment_labels(std::span<const double> activations,
                                        const Segments& segments, double epsilon = 0.0);

// Pearson r of the two series; throws kUndefinedCorrelation if either is constant.
double corr_score(std::span<const double> predicted, std::span<const double> actual);

enum class Aggregation { kPooled, kPerExampleMean };

struct QueryResult {
  std::string query_id;
  std::vector<double> predicted;
  std::vector<double> actual;
  ParseReport report;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  int attempts = 0;
};

struct SimulationRun {
  NeuronId neuron;
  SimMethod method = SimMethod::kTokenLevel;
  Aggregation aggregation = Aggregation::kPooled;
  std::vector<double> predicted;  // concatenated over queries
  std::vector<double> actual;
  double corr_score = 0.0;
  bool corr_defined = false;  // false: series constant, score recorded as 0
  double kendall_tau = 0.0;
  bool tau_defined = false;
  long generated_tokens = 0;  // reasoning + output
  long prompt_tokens = 0;
  int calls = 0;
  int attempts = 0;
  int warnings = 0;
  std::vector<QueryResult> queries;

  void validate() const;
};

struct SimOptions {
  SimMethod method = SimMethod::kTokenLevel;
  // Segments per query, capped at the query's token count.
  std::size_t n_segments = 4;
  double epsilon = 0.0;
  Aggregation aggregation = Aggregation::kPooled;
  RetryPolicy retry;
  std::size_t max_in_flight = 8;
};

// One backend call per example, issued with bounded parallelism.
SimulationRun simulate_neuron(NeuronId neuron, const std::string& explanation,
                              std::span<const ActivationExample> examples, Backend& backend,
                              const SimOptions& options);

// Fills corr/tau from the per-query series according to run.aggregation.
void score_run(SimulationRun& run);

struct SpScoreResult {
  NeuronId neuron;
  int score = 0;
  std::string raw_response;
  bool clamped = false;
  int attempts = 0;
  long generated_tokens = 0;
};

// Reads the "score" field from a fenced json block or a bare object.
int parse_sp_score(const std::string& raw, bool* clamped);

SpScoreResult sp_score(NeuronId neuron, const std::string& explanation, Backend& backend,
                       const RetryPolicy& retry);

struct MethodCost {
  SimMethod method = SimMethod::kTokenLevel;
  std::size_t runs = 0;
  double mean_generated_tokens = 0.0;
  double mean_prompt_tokens = 0.0;
  double mean_total_tokens = 0.0;
};

struct CostReport {
  std::vector<MethodCost> methods;  // in SimMethod order, only methods present
  // 1 - segment/token on mean generated tokens, when both methods ran.
  std::optional<double> savings;
  // Same ratio on prompt + generated tokens.
  std::optional<double> savings_total;
};

double relative_savings(double mean_segment, double mean_token);
CostReport cost_report(std::span<const SimulationRun> runs);

}  // namespace saelab::explain
