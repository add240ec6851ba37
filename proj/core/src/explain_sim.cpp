#include "saelab/explain_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "saelab/checkpoint.hpp"
#include "saelab/correlation.hpp"
#include "saelab/error.hpp"
#include "saelab/parallel.hpp"
#include "saelab/rng.hpp"

namespace saelab::explain {

namespace {

constexpr double kMaxMisalignedFraction = 0.2;
constexpr int kMaxLevel = 10;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view text, double* out) {
  const std::string s(trim(text));
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return false;
  *out = v;
  return true;
}

void warn(ParseReport* report, std::string note) {
  ++report->warnings;
  report->notes.push_back(std::move(note));
}

void check_alignment(const ParseReport& report, std::size_t n) {
  if (static_cast<double>(report.misaligned) > kMaxMisalignedFraction * static_cast<double>(n)) {
    fail(ErrorCode::kSimulationParse,
         std::to_string(report.misaligned) + " of " + std::to_string(n) +
             " positions could not be aligned with the response");
  }
}

std::vector<Message> make_messages(const PromptTemplate& tmpl,
                                   const std::map<std::string, std::string>& vars) {
  return {Message{"system", fill(tmpl.system, vars)}, Message{"user", fill(tmpl.user, vars)}};
}

struct Entry {
  std::optional<std::string> token;
  std::string value;
};

// ("token", 3) or ('token', 3) tuples in order of appearance.
std::vector<Entry> scan_tuples(const std::string& text) {
  std::vector<Entry> out;
  std::size_t i = 0;
  while ((i = text.find('(', i)) != std::string::npos) {
    std::size_t j = i + 1;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j >= text.size() || (text[j] != '"' && text[j] != '\'')) {
      ++i;
      continue;
    }
    const char quote = text[j];
    std::string token;
    std::size_t k = j + 1;
    bool closed = false;
    for (; k < text.size(); ++k) {
      if (text[k] == '\\' && k + 1 < text.size()) {
        token.push_back(text[k]);
        token.push_back(text[++k]);
        continue;
      }
      if (text[k] == quote) {
        closed = true;
        break;
      }
      token.push_back(text[k]);
    }
    const auto comma = closed ? text.find_first_not_of(" \t", k + 1) : std::string::npos;
    if (comma == std::string::npos || text[comma] != ',') {
      ++i;
      continue;
    }
    const auto close = text.find(')', comma);
    if (close == std::string::npos) break;
    out.push_back(Entry{unescape_token(token), text.substr(comma + 1, close - comma - 1)});
    i = close + 1;
  }
  return out;
}

std::vector<Entry> scan_tab_lines(const std::string& text) {
  std::vector<Entry> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) continue;
    out.push_back(Entry{unescape_token(line.substr(0, tab)), line.substr(tab + 1)});
  }
  return out;
}

double clamp_level(double v, ParseReport* report) {
  const double rounded = std::round(v);
  if (rounded < 0.0 || rounded > kMaxLevel) {
    ++report->clamped;
    warn(report, "level " + std::to_string(v) + " clamped into 0..10");
  }
  return std::clamp(rounded, 0.0, static_cast<double>(kMaxLevel));
}

Prediction from_call(const CallResult& call) {
  Prediction p;
  p.prompt_tokens = call.completion.prompt_tokens;
  p.completion_tokens = call.completion.completion_tokens;
  p.attempts = call.attempts;
  return p;
}

}  // namespace

std::string to_string(NeuronId id) {
  return std::to_string(id.layer) + ":" + std::to_string(id.index);
}

void ActivationExample::validate() const {
  require(activations.size() == tokens.size(),
          "example " + query_id + ": activations and tokens differ in length");
  require(token_bins.size() == tokens.size(),
          "example " + query_id + ": token bins and tokens differ in length");
  int max_bin = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    require(activations[i] >= 0.0, "example " + query_id + ": negative activation");
    require(token_bins[i] >= 0 && token_bins[i] <= kMaxLevel,
            "example " + query_id + ": token bin out of range");
    max_bin = std::max(max_bin, token_bins[i]);
  }
  require(bin == max_bin, "example " + query_id + ": bin disagrees with its token bins");
}

int quantize(double activation, double a_max, int levels) {
  require(levels >= 1, "levels must be positive");
  if (!(a_max > 0.0)) fail(ErrorCode::kDeadNeuron, "neuron never activates");
  if (!(activation > 0.0)) return 0;
  const double ratio = std::min(activation / a_max, 1.0);
  return static_cast<int>(std::lround(levels * ratio));
}

std::vector<int> quantize_bins(std::span<const double> activations, int levels) {
  double a_max = 0.0;
  for (double a : activations) a_max = std::max(a_max, a);
  if (!(a_max > 0.0)) fail(ErrorCode::kDeadNeuron, "neuron never activates");
  std::vector<int> bins;
  bins.reserve(activations.size());
  for (double a : activations) bins.push_back(quantize(a, a_max, levels));
  return bins;
}

std::vector<ActivationExample> build_examples(const ingest::ActivationDataset& dataset,
                                              std::span<const double> neuron_activations,
                                              int levels) {
  require(neuron_activations.size() == dataset.meta.size(),
          "neuron activations must cover every dataset row");
  const auto bins = quantize_bins(neuron_activations, levels);
  std::vector<ActivationExample> out;
  for (const auto& span : ingest::query_spans(dataset)) {
    ActivationExample ex;
    ex.query_id = span.query_id;
    for (std::size_t r = span.begin; r < span.end; ++r) {
      ex.tokens.push_back(dataset.meta[r].token_text);
      ex.activations.push_back(std::max(0.0, neuron_activations[r]));
      ex.token_bins.push_back(bins[r]);
      ex.bin = std::max(ex.bin, bins[r]);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ActivationExample> sample_per_bin(std::span<const ActivationExample> examples,
                                              std::size_t per_bin, std::uint64_t seed) {
  require(per_bin >= 1, "per_bin must be at least 1");
  std::map<int, std::vector<std::size_t>, std::greater<>> by_bin;
  for (std::size_t i = 0; i < examples.size(); ++i) by_bin[examples[i].bin].push_back(i);
  std::vector<ActivationExample> out;
  for (auto& [bin, members] : by_bin) {
    if (members.size() > per_bin) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(bin)));
      for (std::size_t i = 0; i < per_bin; ++i) {
        const std::size_t j = i + rng.below(members.size() - i);
        std::swap(members[i], members[j]);
      }
      members.resize(per_bin);
      std::sort(members.begin(), members.end());
    }
    for (auto i : members) out.push_back(examples[i]);
  }
  return out;
}

RenderedPrompt build_explanation_prompt(std::span<const ActivationExample> samples,
                                        NeuronId neuron, const PromptTemplate& tmpl) {
  require(!samples.empty(), "explanation prompt needs at least one sample");
  RenderedPrompt out;
  std::ostringstream body;
  int current_bin = -1;
  std::size_t rendered = 0;
  for (const auto& ex : samples) {
    if (ex.tokens.empty()) {
      out.log.push_back("skipped example " + ex.query_id + ": no tokens");
      continue;
    }
    ex.validate();
    if (ex.bin != current_bin) {
      if (rendered) body << '\n';
      body << "Level " << ex.bin << ":\n";
      current_bin = ex.bin;
    }
    body << "<example " << ex.query_id << ">\n";
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      body << escape_token(ex.tokens[i]) << '\t' << ex.token_bins[i] << '\n';
    }
    body << "</example>\n";
    ++rendered;
  }
  require(rendered > 0, "every sample is empty");
  std::string samples_text = body.str();
  samples_text.pop_back();
  out.messages = make_messages(tmpl, {{"neuron", to_string(neuron)}, {"samples", samples_text}});
  out.log.push_back("rendered " + std::to_string(rendered) + " examples");
  return out;
}

ExplainResult explain_neuron(NeuronId neuron, std::span<const ActivationExample> samples,
                             Backend& backend, const RetryPolicy& retry) {
  auto prompt = build_explanation_prompt(samples, neuron);
  CompletionRequest request{prompt.messages, Task::kExplain, false};
  const auto call = complete_with_retry(backend, request, retry);
  std::string_view text = trim(call.completion.text);
  for (std::string_view prefix : {"Explanation:", "explanation:"}) {
    if (text.substr(0, prefix.size()) == prefix) text = trim(text.substr(prefix.size()));
  }
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    text = trim(text.substr(1, text.size() - 2));
  }
  if (text.empty()) throw BackendError(call.attempts, "backend returned an empty explanation");
  ExplainResult out;
  out.explanation = Explanation{neuron, std::string(text), backend.model_name(), utc_timestamp()};
  out.log = std::move(prompt.log);
  out.attempts = call.attempts;
  out.prompt_tokens = call.completion.prompt_tokens;
  out.completion_tokens = call.completion.completion_tokens;
  return out;
}

const char* method_name(SimMethod method) {
  switch (method) {
    case SimMethod::kAllAtOnce: return "all_at_once";
    case SimMethod::kTokenLevel: return "token_level";
    case SimMethod::kSegmentLevel: return "segment_level";
  }
  return "unknown";
}

SimMethod parse_method(std::string_view name) {
  if (name == "token" || name == "token_level" || name == "token-level") return SimMethod::kTokenLevel;
  if (name == "segment" || name == "segment_level" || name == "segment-level") {
    return SimMethod::kSegmentLevel;
  }
  if (name == "all-at-once" || name == "all_at_once") return SimMethod::kAllAtOnce;
  fail(ErrorCode::kInvalidInput, "unknown simulation method: " + std::string(name));
}

std::vector<Message> token_simulation_messages(const std::string& explanation,
                                               const std::vector<std::string>& tokens) {
  return make_messages(builtin_template(TemplateId::kTokenSimulation),
                       {{"explanation", explanation}, {"activations", render_unknown_lines(tokens)}});
}

std::vector<Message> segment_simulation_messages(const std::string& explanation,
                                                 const std::vector<std::string>& contents) {
  return make_messages(builtin_template(TemplateId::kSegmentSimulation),
                       {{"explanation", explanation}, {"segments", render_segment_lines(contents)}});
}

std::vector<Message> spscore_messages(const std::string& explanation) {
  return make_messages(builtin_template(TemplateId::kSpScore), {{"explanation", explanation}});
}

std::vector<double> parse_token_response(const std::string& text,
                                         const std::vector<std::string>& tokens,
                                         ParseReport* report) {
  auto entries = scan_tuples(text);
  if (entries.empty()) entries = scan_tab_lines(text);
  const std::size_t n = tokens.size();
  std::vector<double> values(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= entries.size()) {
      ++report->misaligned;
      warn(report, "position " + std::to_string(i) + " missing from response");
      continue;
    }
    const auto& e = entries[i];
    if (e.token && trim(*e.token) != trim(tokens[i])) {
      ++report->misaligned;
      warn(report, "position " + std::to_string(i) + " names a different token");
      continue;
    }
    double v = 0.0;
    if (!parse_number(e.value, &v)) {
      ++report->misaligned;
      warn(report, "position " + std::to_string(i) + " has no numeric level");
      continue;
    }
    values[i] = clamp_level(v, report);
  }
  if (entries.size() > n) {
    warn(report, std::to_string(entries.size() - n) + " extra entries ignored");
  }
  check_alignment(*report, n);
  return values;
}

std::vector<double> expected_levels(const std::vector<SlotLogprobs>& slots, std::size_t n_tokens,
                                    ParseReport* report) {
  std::vector<double> values(n_tokens, 0.0);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (i >= slots.size()) {
      ++report->misaligned;
      warn(report, "slot " + std::to_string(i) + " has no log-probabilities");
      continue;
    }
    double mass[kMaxLevel + 1] = {};
    double total = 0.0;
    for (const auto& [token, logprob] : slots[i].candidates) {
      double v = 0.0;
      if (!parse_number(token, &v) || v != std::floor(v) || v < 0 || v > kMaxLevel) continue;
      const double p = std::exp(logprob);
      mass[static_cast<int>(v)] += p;
      total += p;
    }
    if (!(total > 0.0)) {
      ++report->misaligned;
      warn(report, "slot " + std::to_string(i) + " has no digit candidates");
      continue;
    }
    double expected = 0.0;
    for (int v = 0; v <= kMaxLevel; ++v) expected += v * (mass[v] / total);
    values[i] = expected;
  }
  check_alignment(*report, n_tokens);
  return values;
}

std::vector<bool> parse_segment_response(const std::string& text, std::size_t n_segments,
                                         ParseReport* report) {
  static const std::regex line_re(R"(segment\s*(\d+)\s*:\s*(non[- ]?activ\w*|not activ\w*|activ\w*))",
                                  std::regex::icase);
  std::vector<std::optional<bool>> seen(n_segments);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), line_re);
       it != std::sregex_iterator(); ++it) {
    const auto index = std::strtoull((*it)[1].str().c_str(), nullptr, 10);
    std::string verdict = (*it)[2].str();
    std::transform(verdict.begin(), verdict.end(), verdict.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const bool active = verdict.rfind("activ", 0) == 0;
    if (index < 1 || index > n_segments) {
      warn(report, "segment index " + std::to_string(index) + " out of range");
      continue;
    }
    if (seen[index - 1]) warn(report, "segment " + std::to_string(index) + " answered twice");
    seen[index - 1] = active;
  }
  std::vector<bool> out(n_segments, false);
  for (std::size_t i = 0; i < n_segments; ++i) {
    if (seen[i]) {
      out[i] = *seen[i];
    } else {
      warn(report, "segment " + std::to_string(i + 1) + " missing; treated as non-activate");
    }
  }
  return out;
}

Prediction simulate_token_level(const std::string& explanation,
                                const std::vector<std::string>& tokens, Backend& backend,
                                const RetryPolicy& retry) {
  CompletionRequest request{token_simulation_messages(explanation, tokens),
                            Task::kTokenSimulation, false};
  const auto call = complete_with_retry(backend, request, retry);
  auto out = from_call(call);
  out.values = parse_token_response(call.completion.text, tokens, &out.report);
  return out;
}

Prediction simulate_all_at_once(const std::string& explanation,
                                const std::vector<std::string>& tokens, Backend& backend,
                                const RetryPolicy& retry) {
  if (!backend.supports_logprobs()) {
    fail(ErrorCode::kUnsupportedBackend,
         "all-at-once simulation needs a backend that returns log-probabilities");
  }
  CompletionRequest request{token_simulation_messages(explanation, tokens), Task::kAllAtOnce, true};
  const auto call = complete_with_retry(backend, request, retry);
  if (!call.completion.logprobs) {
    fail(ErrorCode::kUnsupportedBackend, "backend response carries no log-probabilities");
  }
  auto out = from_call(call);
  out.values = expected_levels(*call.completion.logprobs, tokens.size(), &out.report);
  return out;
}

Segments split_segments(const std::vector<std::string>& tokens, std::size_t n_segments) {
  require(n_segments >= 1, "n_segments must be at least 1");
  require(n_segments <= tokens.size(), "n_segments exceeds the token count");
  const std::size_t base = tokens.size() / n_segments;
  const std::size_t extra = tokens.size() % n_segments;
  Segments out;
  auto it = tokens.begin();
  for (std::size_t s = 0; s < n_segments; ++s) {
    const auto len = static_cast<std::ptrdiff_t>(base + (s < extra ? 1 : 0));
    out.emplace_back(it, it + len);
    it += len;
  }
  return out;
}

Prediction simulate_segment_level(const std::string& explanation, const Segments& segments,
                                  Backend& backend, const RetryPolicy& retry) {
  std::vector<std::string> contents;
  for (const auto& seg : segments) {
    contents.push_back(std::accumulate(seg.begin(), seg.end(), std::string()));
  }
  CompletionRequest request{segment_simulation_messages(explanation, contents),
                            Task::kSegmentSimulation, false};
  const auto call = complete_with_retry(backend, request, retry);
  auto out = from_call(call);
  for (bool b : parse_segment_response(call.completion.text, segments.size(), &out.report)) {
    out.values.push_back(b ? 1.0 : 0.0);
  }
  return out;
}

std::vector<bool> actual_segment_labels(std::span<const double> activations,
                                        const Segments& segments, double epsilon) {
  std::size_t total = 0;
  for (const auto& seg : segments) total += seg.size();
  require(total == activations.size(), "segments do not cover the activation series");
  std::vector<bool> out;
  std::size_t pos = 0;
  for (const auto& seg : segments) {
    bool any = false;
    for (std::size_t i = 0; i < seg.size(); ++i) any = any || activations[pos + i] > epsilon;
    out.push_back(any);
    pos += seg.size();
  }
  return out;
}

double corr_score(std::span<const double> predicted, std::span<const double> actual) {
  return pearson(predicted, actual);
}

void SimulationRun::validate() const {
  require(predicted.size() == actual.size(), "predicted and actual differ in length");
  require(corr_score >= -1.0 && corr_score <= 1.0, "corr_score out of range");
  require(kendall_tau >= -1.0 && kendall_tau <= 1.0, "kendall_tau out of range");
}

namespace {

template <typename Fn>
std::optional<double> guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefinedCorrelation && e.code() != ErrorCode::kInvalidInput) throw;
    return std::nullopt;
  }
}

}  // namespace

void score_run(SimulationRun& run) {
  run.predicted.clear();
  run.actual.clear();
  for (const auto& q : run.queries) {
    run.predicted.insert(run.predicted.end(), q.predicted.begin(), q.predicted.end());
    run.actual.insert(run.actual.end(), q.actual.begin(), q.actual.end());
  }
  std::optional<double> r;
  std::optional<double> tau;
  if (run.aggregation == Aggregation::kPooled) {
    r = guarded([&] { return pearson(run.predicted, run.actual); });
    tau = guarded([&] { return kendall_tau_b(run.predicted, run.actual); });
  } else {
    double r_sum = 0.0;
    double tau_sum = 0.0;
    int r_n = 0;
    int tau_n = 0;
    for (const auto& q : run.queries) {
      if (auto v = guarded([&] { return pearson(q.predicted, q.actual); })) {
        r_sum += *v;
        ++r_n;
      }
      if (auto v = guarded([&] { return kendall_tau_b(q.predicted, q.actual); })) {
        tau_sum += *v;
        ++tau_n;
      }
    }
    if (r_n) r = r_sum / r_n;
    if (tau_n) tau = tau_sum / tau_n;
  }
  run.corr_defined = r.has_value();
  run.corr_score = r.value_or(0.0);
  run.tau_defined = tau.has_value();
  run.kendall_tau = tau.value_or(0.0);
}

SimulationRun simulate_neuron(NeuronId neuron, const std::string& explanation,
                              std::span<const ActivationExample> examples, Backend& backend,
                              const SimOptions& options) {
  require(!examples.empty(), "simulation needs at least one example");
  for (const auto& ex : examples) ex.validate();
  SimulationRun run;
  run.neuron = neuron;
  run.method = options.method;
  run.aggregation = options.aggregation;
  run.queries.resize(examples.size());
  parallel_for(examples.size(), options.max_in_flight, [&](std::size_t i) {
    const auto& ex = examples[i];
    QueryResult& q = run.queries[i];
    q.query_id = ex.query_id;
    if (ex.tokens.empty()) return;
    Prediction p;
    switch (options.method) {
      case SimMethod::kTokenLevel:
        p = simulate_token_level(explanation, ex.tokens, backend, options.retry);
        q.actual = ex.activations;
        break;
      case SimMethod::kAllAtOnce:
        p = simulate_all_at_once(explanation, ex.tokens, backend, options.retry);
        q.actual = ex.activations;
        break;
      case SimMethod::kSegmentLevel: {
        const std::size_t n = options.n_segments == 0
                                  ? ex.tokens.size()
                                  : std::min(options.n_segments, ex.tokens.size());
        const auto segments = split_segments(ex.tokens, n);
        p = simulate_segment_level(explanation, segments, backend, options.retry);
        for (bool b : actual_segment_labels(ex.activations, segments, options.epsilon)) {
          q.actual.push_back(b ? 1.0 : 0.0);
        }
        break;
      }
    }
    q.predicted = std::move(p.values);
    q.report = std::move(p.report);
    q.prompt_tokens = p.prompt_tokens;
    q.completion_tokens = p.completion_tokens;
    q.attempts = p.attempts;
  });
  for (const auto& q : run.queries) {
    if (q.attempts == 0) continue;
    ++run.calls;
    run.attempts += q.attempts;
    run.generated_tokens += q.completion_tokens;
    run.prompt_tokens += q.prompt_tokens;
    run.warnings += q.report.warnings;
  }
  score_run(run);
  run.validate();
  return run;
}

int parse_sp_score(const std::string& raw, bool* clamped) {
  *clamped = false;
  std::string candidate;
  for (const std::string fence : {"```", "'''"}) {
    const auto open = raw.find(fence);
    if (open == std::string::npos) continue;
    const auto close = raw.find(fence, open + fence.size());
    if (close == std::string::npos) continue;
    std::string inner = raw.substr(open + fence.size(), close - open - fence.size());
    if (inner.rfind("json", 0) == 0) inner.erase(0, 4);
    candidate = std::move(inner);
    break;
  }
  if (candidate.empty()) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open != std::string::npos && close != std::string::npos && close > open) {
      candidate = raw.substr(open, close - open + 1);
    }
  }
  if (candidate.empty()) throw SpScoreParseError(raw, "no score record in response");
  double value = 0.0;
  try {
    const auto j = nlohmann::json::parse(candidate);
    const auto& score = j.at("score");
    if (score.is_string()) {
      if (!parse_number(score.get<std::string>(), &value)) {
        throw SpScoreParseError(raw, "score is not numeric");
      }
    } else {
      value = score.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpScoreParseError(raw, std::string("unparseable score record: ") + e.what());
  }
  if (!std::isfinite(value)) throw SpScoreParseError(raw, "score is not finite");
  const double rounded = std::round(value);
  if (rounded < 0.0 || rounded > kMaxLevel) *clamped = true;
  return static_cast<int>(std::clamp(rounded, 0.0, static_cast<double>(kMaxLevel)));
}

SpScoreResult sp_score(NeuronId neuron, const std::string& explanation, Backend& backend,
                       const RetryPolicy& retry) {
  CompletionRequest request{spscore_messages(explanation), Task::kSpScore, false};
  const auto call = complete_with_retry(backend, request, retry);
  SpScoreResult out;
  out.neuron = neuron;
  out.raw_response = call.completion.text;
  out.score = parse_sp_score(out.raw_response, &out.clamped);
  out.attempts = call.attempts;
  out.generated_tokens = call.completion.completion_tokens;
  return out;
}

double relative_savings(double mean_segment, double mean_token) {
  require(mean_token > 0.0, "token-level mean must be positive");
  return 1.0 - mean_segment / mean_token;
}

CostReport cost_report(std::span<const SimulationRun> runs) {
  require(!runs.empty(), "cost report needs at least one run");
  struct Acc {
    std::size_t runs = 0;
    double generated = 0.0;
    double prompt = 0.0;
  };
  std::map<SimMethod, Acc> acc;
  for (const auto& run : runs) {
    auto& a = acc[run.method];
    ++a.runs;
    a.generated += static_cast<double>(run.generated_tokens);
    a.prompt += static_cast<double>(run.prompt_tokens);
  }
  CostReport report;
  for (const auto& [method, a] : acc) {
    MethodCost c;
    c.method = method;
    c.runs = a.runs;
    c.mean_generated_tokens = a.generated / static_cast<double>(a.runs);
    c.mean_prompt_tokens = a.prompt / static_cast<double>(a.runs);
    c.mean_total_tokens = c.mean_generated_tokens + c.mean_prompt_tokens;
    report.methods.push_back(c);
  }
  const auto tok = acc.find(SimMethod::kTokenLevel);
  const auto seg = acc.find(SimMethod::kSegmentLevel);
  if (tok != acc.end() && seg != acc.end()) {
    const auto mean = [](const Acc& a, double Acc::*field) {
      return a.*field / static_cast<double>(a.runs);
    };
    const double tok_gen = mean(tok->second, &Acc::generated);
    const double seg_gen = mean(seg->second, &Acc::generated);
    if (tok_gen > 0.0) report.savings = relative_savings(seg_gen, tok_gen);
    const double tok_total = tok_gen + mean(tok->second, &Acc::prompt);
    const double seg_total = seg_gen + mean(seg->second, &Acc::prompt);
    if (tok_total > 0.0) report.savings_total = relative_savings(seg_total, tok_total);
  }
  return report;
}

}  // namespace saelab::explain
