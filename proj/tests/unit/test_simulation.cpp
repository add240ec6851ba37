#include <gtest/gtest.h>

#include "saelab/correlation.hpp"
#include "saelab/error.hpp"
#include "saelab/explain_io.hpp"
#include "saelab/explain_sim.hpp"
#include "saelab/mock_backend.hpp"
#include "saelab/mock_corpus.hpp"
#include "oracles.hpp"

using namespace saelab;
using namespace saelab::explain;

namespace {

const MockCorpus& corpus() {
  static const MockCorpus c = gen_mock_corpus(0, 30);
  return c;
}

SimOptions opts(SimMethod m, std::size_t n_segments = 4) {
  SimOptions o;
  o.method = m;
  o.n_segments = n_segments;
  o.max_in_flight = 1;
  return o;
}

SimulationRun run_mock(const MockNeuron& n, const SimOptions& o, MockRules rules) {
  MockBackend backend(std::move(rules));
  const auto ex = corpus().examples(n);
  return simulate_neuron(n.id, n.explanation, ex, backend, o);
}

}  // namespace

TEST(Simulation, PerfectOracleTokenLevel) {
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& n = corpus().neurons[i];
    const auto run = run_mock(n, opts(SimMethod::kTokenLevel), corpus().rules(n));
    ASSERT_TRUE(run.corr_defined);
    EXPECT_NEAR(run.corr_score, 1.0, 1e-12) << to_string(n.id);
    EXPECT_NEAR(run.kendall_tau, 1.0, 1e-12);
    EXPECT_EQ(run.calls, static_cast<int>(corpus().queries.size()));
    EXPECT_EQ(run.attempts, run.calls);
    EXPECT_EQ(run.warnings, 0);
  }
}

TEST(Simulation, PerfectOracleAllAtOnce) {
  const auto& n = corpus().neurons[0];
  const auto run = run_mock(n, opts(SimMethod::kAllAtOnce), corpus().rules(n));
  EXPECT_NEAR(run.corr_score, 1.0, 1e-12);
}

TEST(Simulation, AllAtOnceNeedsLogprobs) {
  const auto& n = corpus().neurons[0];
  auto rules = corpus().rules(n);
  rules.logprobs = false;
  try {
    run_mock(n, opts(SimMethod::kAllAtOnce), rules);
    FAIL() << "expected unsupported backend";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedBackend);
  }
}

TEST(Simulation, OneTokenSegmentsEqualBooleanTokenLevel) {
  // Any rules, not just the matching ones: the identity is structural.
  MockRules skewed;
  skewed.levels = {{"kill", 3}, {" the", 2}, {"drug", 9}};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& n = corpus().neurons[i];
    const auto tok = run_mock(n, opts(SimMethod::kTokenLevel), skewed);
    const auto seg = run_mock(n, opts(SimMethod::kSegmentLevel, 0), skewed);
    ASSERT_EQ(tok.predicted.size(), seg.predicted.size());
    std::vector<double> p, a;
    for (std::size_t k = 0; k < tok.predicted.size(); ++k) {
      p.push_back(tok.predicted[k] > 0 ? 1.0 : 0.0);
      a.push_back(tok.actual[k] > 0 ? 1.0 : 0.0);
    }
    EXPECT_EQ(seg.predicted, p);
    EXPECT_EQ(seg.actual, a);
    EXPECT_NEAR(seg.corr_score, oracle::pearson_naive(p, a), 1e-10);
  }
}

TEST(Simulation, SegmentLabelsFollowAnyTokenRule) {
  const auto& n = corpus().neurons[0];
  const auto run = run_mock(n, opts(SimMethod::kSegmentLevel, 4), corpus().rules(n));
  std::size_t pos = 0;
  const auto ex = corpus().examples(n);
  for (std::size_t q = 0; q < ex.size(); ++q) {
    const auto segs = split_segments(ex[q].tokens, std::min<std::size_t>(4, ex[q].tokens.size()));
    std::size_t t = 0;
    for (const auto& s : segs) {
      bool any = false;
      for (std::size_t i = 0; i < s.size(); ++i) any = any || ex[q].activations[t + i] > 0;
      t += s.size();
      EXPECT_EQ(run.actual[pos], any ? 1.0 : 0.0);
      EXPECT_EQ(run.predicted[pos], any ? 1.0 : 0.0);  // matching rules predict perfectly
      ++pos;
    }
  }
  EXPECT_EQ(pos, run.actual.size());
}

TEST(Simulation, RetriesAreCounted) {
  const auto& n = corpus().neurons[0];
  auto rules = corpus().rules(n);
  rules.fail_first = 2;
  const auto run = run_mock(n, opts(SimMethod::kTokenLevel), rules);
  EXPECT_EQ(run.attempts, run.calls + 2);
  EXPECT_EQ(run.queries[0].attempts, 3);
}

TEST(Simulation, RetryExhaustionSurfaces) {
  const auto& n = corpus().neurons[0];
  auto rules = corpus().rules(n);
  rules.fail_first = 100;
  auto o = opts(SimMethod::kTokenLevel);
  o.retry.max_retries = 1;
  EXPECT_THROW(run_mock(n, o, rules), BackendError);
}

TEST(Simulation, SilentNeuronHasUndefinedScore) {
  const auto& n = corpus().neurons[3];
  const auto run = run_mock(n, opts(SimMethod::kTokenLevel), corpus().rules(n));
  EXPECT_FALSE(run.corr_defined);
  EXPECT_EQ(run.corr_score, 0.0);
}

TEST(Simulation, PerExampleMeanAggregation) {
  MockRules skewed;
  skewed.levels = {{"kill", 3}, {" the", 2}, {"drug", 9}, {" my", 1}};
  const auto& n = corpus().neurons[0];
  auto o = opts(SimMethod::kTokenLevel);
  o.aggregation = Aggregation::kPerExampleMean;
  const auto run = run_mock(n, o, skewed);
  double sum = 0;
  int count = 0;
  for (const auto& q : run.queries) {
    try {
      sum += pearson(q.predicted, q.actual);
      ++count;
    } catch (const Error&) {
    }
  }
  ASSERT_GT(count, 0);
  EXPECT_NEAR(run.corr_score, sum / count, 1e-12);
}

TEST(Simulation, TokenCostExceedsSegmentCost) {
  const auto& n = corpus().neurons[0];
  const auto tok = run_mock(n, opts(SimMethod::kTokenLevel), corpus().rules(n));
  const auto seg = run_mock(n, opts(SimMethod::kSegmentLevel, 4), corpus().rules(n));
  EXPECT_GT(tok.generated_tokens, seg.generated_tokens);
  long sum = 0;
  for (const auto& q : tok.queries) sum += q.completion_tokens;
  EXPECT_EQ(tok.generated_tokens, sum);
}

TEST(ExplainIo, RunRoundTrip) {
  const auto& n = corpus().neurons[1];
  const auto run = run_mock(n, opts(SimMethod::kSegmentLevel, 3), corpus().rules(n));
  const auto back = run_from_json(to_json(run));
  EXPECT_EQ(back.neuron, run.neuron);
  EXPECT_EQ(back.method, run.method);
  EXPECT_EQ(back.predicted, run.predicted);
  EXPECT_EQ(back.actual, run.actual);
  EXPECT_DOUBLE_EQ(back.corr_score, run.corr_score);
  EXPECT_DOUBLE_EQ(back.kendall_tau, run.kendall_tau);
  EXPECT_EQ(back.generated_tokens, run.generated_tokens);

  const auto summary = run_from_json(to_json(run, false));
  EXPECT_DOUBLE_EQ(summary.corr_score, run.corr_score);
  EXPECT_TRUE(summary.queries.empty());

  const auto lines = to_json(run).dump() + "\n\n" + to_json(run, false).dump() + "\n";
  EXPECT_EQ(parse_runs(lines).size(), 2u);
  EXPECT_THROW(parse_runs("{\"layer\": 1}\n"), Error);
}

TEST(ExplainIo, ExplanationRecordRoundTrip) {
  ExplanationRecord r;
  r.explanation = Explanation{{17, 101}, "violent verbs", "mock", "2025-01-01T00:00:00Z"};
  r.max_activation = 4.2;
  r.safety_tags = {"crime/violence"};
  r.freq_by_concept = {{"crime/violence", 0.8}};
  const auto text = to_json(r).dump() + "\n";
  const auto back = parse_explanations(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].explanation.neuron, r.explanation.neuron);
  EXPECT_EQ(back[0].explanation.text, r.explanation.text);
  EXPECT_EQ(back[0].safety_tags, r.safety_tags);
  EXPECT_EQ(back[0].freq_by_concept, r.freq_by_concept);
  EXPECT_DOUBLE_EQ(back[0].max_activation, 4.2);
  EXPECT_THROW(parse_explanations(R"({"layer": 1, "index": 2, "explanation": ""})"), Error);
}
