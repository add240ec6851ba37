#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "saelab/error.hpp"
#include "saelab/explain_sim.hpp"
#include "saelab/mock_backend.hpp"
#include "saelab/rng.hpp"
#include "test_util.hpp"

using namespace saelab;
using namespace saelab::explain;

namespace {

ActivationExample example(const std::string& id, std::vector<std::string> tokens,
                          std::vector<double> acts, double a_max) {
  ActivationExample ex;
  ex.query_id = id;
  ex.tokens = std::move(tokens);
  ex.activations = std::move(acts);
  for (double a : ex.activations) {
    ex.token_bins.push_back(quantize(a, a_max));
    ex.bin = std::max(ex.bin, ex.token_bins.back());
  }
  return ex;
}

std::vector<ActivationExample> golden_samples() {
  return {
      example("q-7", {" how", " to", " kill", " a", " process"}, {0, 0, 4.0, 0.3, 0}, 4.0),
      example("q-2", {" attack", " the\tplan"}, {2.2, 0.0}, 4.0),
      example("q-9", {" nice", " weather"}, {0.0, 0.0}, 4.0),
  };
}

std::vector<ActivationExample> many(std::size_t n, Rng& rng) {
  std::vector<ActivationExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int bin = static_cast<int>(rng.below(11));
    out.push_back(example("q" + std::to_string(i), {"t"}, {bin / 10.0}, 1.0));
  }
  return out;
}

}  // namespace

TEST(Quantize, Examples) {
  EXPECT_EQ(quantize(0.26, 1.0), 3);
  EXPECT_EQ(quantize(0.24, 1.0), 2);
  EXPECT_EQ(quantize(4.0, 4.0), 10);
  EXPECT_EQ(quantize(0.0, 4.0), 0);
  EXPECT_EQ(quantize(-1.0, 4.0), 0);
  EXPECT_EQ(quantize(9.0, 4.0), 10);
  EXPECT_THROW(quantize(1.0, 0.0), Error);
}

TEST(Quantize, DeadNeuron) {
  const std::vector<double> zeros(5, 0.0);
  try {
    quantize_bins(zeros);
    FAIL() << "expected dead neuron";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDeadNeuron);
  }
}

TEST(Quantize, BinsAgainstSeriesMax) {
  const std::vector<double> acts = {0.0, 0.5, 2.0, 1.0, -0.3};
  EXPECT_EQ(quantize_bins(acts), (std::vector<int>{0, 3, 10, 5, 0}));
}

TEST(SamplePerBin, SmallBinsKeptWhole) {
  Rng rng(1);
  std::vector<ActivationExample> ex;
  for (int i = 0; i < 5; ++i) ex.push_back(example("a" + std::to_string(i), {"x"}, {1.0}, 1.0));
  const auto s = sample_per_bin(ex, 20, 9);
  ASSERT_EQ(s.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s[i].query_id, "a" + std::to_string(i));
}

TEST(SamplePerBin, CapsEachBinWithoutDuplicates) {
  Rng rng(2);
  const auto ex = many(1000, rng);
  std::map<int, std::size_t> in_bin;
  for (const auto& e : ex) ++in_bin[e.bin];
  const auto s = sample_per_bin(ex, 20, 4);
  std::map<int, std::size_t> out_bin;
  std::set<std::string> ids;
  int last_bin = 11;
  for (const auto& e : s) {
    ++out_bin[e.bin];
    EXPECT_TRUE(ids.insert(e.query_id).second);
    EXPECT_LE(e.bin, last_bin);
    last_bin = e.bin;
  }
  for (const auto& [bin, count] : in_bin) EXPECT_EQ(out_bin[bin], std::min<std::size_t>(count, 20));
}

TEST(SamplePerBin, DeterministicPerSeed) {
  Rng rng(3);
  const auto ex = many(300, rng);
  const auto a = sample_per_bin(ex, 5, 11);
  const auto b = sample_per_bin(ex, 5, 11);
  const auto c = sample_per_bin(ex, 5, 12);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].query_id, b[i].query_id);
    differs = differs || a[i].query_id != c[i].query_id;
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(sample_per_bin(ex, 0, 1), Error);
}

TEST(SamplePerBin, UniformOverManySeeds) {
  // Each of 40 same-bin members should be picked about 1/4 of the time.
  std::vector<ActivationExample> ex;
  for (int i = 0; i < 40; ++i) ex.push_back(example(std::to_string(i), {"x"}, {1.0}, 1.0));
  std::map<std::string, int> hits;
  const int trials = 4000;
  for (int seed = 0; seed < trials; ++seed) {
    for (const auto& e : sample_per_bin(ex, 10, static_cast<std::uint64_t>(seed))) ++hits[e.query_id];
  }
  for (const auto& [id, h] : hits) EXPECT_NEAR(h / double(trials), 0.25, 0.04) << id;
}

TEST(ExplanationPrompt, ContainsEveryTokenAndBin) {
  const auto samples = golden_samples();
  const auto p = build_explanation_prompt(samples, NeuronId{17, 101});
  ASSERT_EQ(p.messages.size(), 2u);
  const auto& user = p.messages[1].content;
  EXPECT_NE(user.find("17:101"), std::string::npos);
  for (const auto& ex : samples) {
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      const auto line = escape_token(ex.tokens[i]) + "\t" + std::to_string(ex.token_bins[i]) + "\n";
      EXPECT_NE(user.find(line), std::string::npos) << line;
    }
  }
  EXPECT_EQ(user.find("{{"), std::string::npos);
}

TEST(ExplanationPrompt, MatchesGolden) {
  const auto p = build_explanation_prompt(golden_samples(), NeuronId{17, 101});
  const std::string rendered =
      "--- system\n" + p.messages[0].content + "\n--- user\n" + p.messages[1].content + "\n";
  const auto path = testutil::source_dir() / "tests" / "golden" / "explanation_prompt.txt";
  if (std::getenv("SAELAB_UPDATE_GOLDEN")) testutil::spit(path, rendered);
  EXPECT_EQ(rendered, testutil::slurp(path));
}

TEST(ExplanationPrompt, EmptySampleSkippedAndLogged) {
  auto samples = golden_samples();
  ActivationExample empty;
  empty.query_id = "q-empty";
  samples.insert(samples.begin() + 1, empty);
  const auto p = build_explanation_prompt(samples, NeuronId{1, 2});
  EXPECT_EQ(p.messages[1].content.find("q-empty"), std::string::npos);
  bool logged = false;
  for (const auto& line : p.log) logged = logged || line.find("q-empty") != std::string::npos;
  EXPECT_TRUE(logged);
  EXPECT_THROW(build_explanation_prompt({}, NeuronId{1, 2}), Error);
  const std::vector<ActivationExample> only_empty = {empty};
  EXPECT_THROW(build_explanation_prompt(only_empty, NeuronId{1, 2}), Error);
}

TEST(ExplainNeuron, StripsPrefixAndQuotes) {
  MockRules rules;
  rules.explanation = "Explanation: \"mentions of weapons\"";
  MockBackend backend(rules);
  const auto r = explain_neuron(NeuronId{3, 4}, golden_samples(), backend, {});
  EXPECT_EQ(r.explanation.text, "mentions of weapons");
  EXPECT_EQ(r.explanation.explainer_model, "mock");
  EXPECT_EQ(r.attempts, 1);
  rules.explanation = "  ";
  MockBackend blank(rules);
  EXPECT_THROW(explain_neuron(NeuronId{3, 4}, golden_samples(), blank, {}), BackendError);
}

TEST(SplitSegments, BalancedLongerFirst) {
  const std::vector<std::string> t = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const auto s = split_segments(t, 3);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].size(), 4u);
  EXPECT_EQ(s[1].size(), 3u);
  EXPECT_EQ(s[2].size(), 3u);
  const auto singles = split_segments(t, 10);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(singles[i], std::vector<std::string>{t[i]});
  EXPECT_THROW(split_segments(t, 11), Error);
  EXPECT_THROW(split_segments(t, 0), Error);
}

TEST(SplitSegments, PropertyConcatenationAndBalance) {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> t(1 + rng.below(60));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::to_string(i);
    const std::size_t n = 1 + rng.below(t.size());
    const auto s = split_segments(t, n);
    ASSERT_EQ(s.size(), n);
    std::vector<std::string> joined;
    std::size_t lo = t.size(), hi = 0;
    for (const auto& seg : s) {
      joined.insert(joined.end(), seg.begin(), seg.end());
      lo = std::min(lo, seg.size());
      hi = std::max(hi, seg.size());
    }
    EXPECT_EQ(joined, t);
    EXPECT_LE(hi - lo, 1u);
    EXPECT_GE(lo, 1u);
  }
}

TEST(ExpectedLevels, Examples) {
  ParseReport r;
  const std::vector<SlotLogprobs> slots = {
      {{{"0", std::log(0.5)}, {"10", std::log(0.5)}}},
      {{{"7", 0.0}}},
      {{{"3", std::log(0.2)}, {"x", std::log(0.5)}, {"5", std::log(0.2)}}},
  };
  const auto v = expected_levels(slots, 3, &r);
  EXPECT_NEAR(v[0], 5.0, 1e-12);
  EXPECT_NEAR(v[1], 7.0, 1e-12);
  EXPECT_NEAR(v[2], 4.0, 1e-12);  // renormalized over digits only
  EXPECT_EQ(r.misaligned, 0);
}

TEST(ExpectedLevels, UniformIsFive) {
  SlotLogprobs slot;
  for (int v = 0; v <= 10; ++v) slot.candidates.emplace_back(std::to_string(v), std::log(1.0 / 11));
  ParseReport r;
  EXPECT_NEAR(expected_levels({slot}, 1, &r)[0], 5.0, 1e-12);
}

TEST(ExpectedLevels, MissingSlotsCountAsMisaligned) {
  ParseReport r;
  std::vector<SlotLogprobs> slots(9, SlotLogprobs{{{"1", 0.0}}});
  EXPECT_NO_THROW(expected_levels(slots, 10, &r));  // 1 of 10 missing
  EXPECT_EQ(r.misaligned, 1);
  ParseReport r2;
  EXPECT_THROW(expected_levels(slots, 12, &r2), Error);
}

TEST(TokenResponse, TuplesAndTabLines) {
  const std::vector<std::string> tokens = {" The", " gun", ","};
  ParseReport r;
  EXPECT_EQ(parse_token_response("[(\" The\", 0), (\" gun\", 8), (\",\", 1)]", tokens, &r),
            (std::vector<double>{0, 8, 1}));
  EXPECT_EQ(r.warnings, 0);
  ParseReport r2;
  EXPECT_EQ(parse_token_response(" The\t0\n gun\t8\n,\t1\n", tokens, &r2),
            (std::vector<double>{0, 8, 1}));
  EXPECT_EQ(r2.warnings, 0);
}

TEST(TokenResponse, ShortTailFilledWithWarning) {
  std::vector<std::string> tokens;
  std::string text;
  for (int i = 0; i < 10; ++i) {
    tokens.push_back("t" + std::to_string(i));
    if (i < 9) text += "t" + std::to_string(i) + "\t" + std::to_string(i) + "\n";
  }
  ParseReport r;
  const auto v = parse_token_response(text, tokens, &r);
  EXPECT_EQ(v[8], 8.0);
  EXPECT_EQ(v[9], 0.0);
  EXPECT_EQ(r.misaligned, 1);
  EXPECT_GE(r.warnings, 1);
}

TEST(TokenResponse, TooMuchMisalignmentFails) {
  const std::vector<std::string> tokens = {"a", "b", "c", "d", "e"};
  ParseReport r;
  try {
    parse_token_response("a\t1\nX\t2\nY\t3\nd\t4\ne\t5", tokens, &r);
    FAIL() << "expected parse failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSimulationParse);
  }
  ParseReport r2;
  EXPECT_THROW(parse_token_response("", tokens, &r2), Error);
}

TEST(TokenResponse, OutOfRangeClamped) {
  const std::vector<std::string> tokens = {"a", "b", "c"};
  ParseReport r;
  EXPECT_EQ(parse_token_response("a\t14\nb\t-2\nc\t6.6", tokens, &r),
            (std::vector<double>{10, 0, 7}));
  EXPECT_EQ(r.clamped, 2);
}

TEST(SegmentResponse, OrderIndependent) {
  ParseReport a, b;
  const auto in_order = parse_segment_response(
      "Segment 1: activate\nSegment 2: non-activate\nSegment 3: activate", 3, &a);
  const auto shuffled = parse_segment_response(
      "segment 3: Activate\nSegment 1 : activated\nSEGMENT 2: Non-Activate", 3, &b);
  EXPECT_EQ(in_order, (std::vector<bool>{true, false, true}));
  EXPECT_EQ(shuffled, in_order);
  EXPECT_EQ(a.warnings, 0);
  EXPECT_EQ(b.warnings, 0);
}

TEST(SegmentResponse, AllNonActivateAndMissing) {
  ParseReport r;
  EXPECT_EQ(parse_segment_response("Segment 1: non-activate\nSegment 2: not activated", 2, &r),
            (std::vector<bool>{false, false}));
  ParseReport m;
  EXPECT_EQ(parse_segment_response("Segment 2: activate\nSegment 9: activate", 3, &m),
            (std::vector<bool>{false, true, false}));
  EXPECT_EQ(m.warnings, 3);  // out of range plus two missing
}

TEST(SegmentLabels, MatchLoopOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::string> tokens(n, "t");
    std::vector<double> acts(n);
    for (auto& a : acts) a = rng.coin() ? 0.0 : rng.uniform(0.0, 0.2);
    const double eps = rng.coin() ? 0.0 : 0.1;
    const auto segs = split_segments(tokens, 1 + rng.below(n));
    const auto labels = actual_segment_labels(acts, segs, eps);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < segs.size(); ++s) {
      bool any = false;
      for (std::size_t i = 0; i < segs[s].size(); ++i) {
        if (acts[pos + i] > eps) any = true;
      }
      pos += segs[s].size();
      EXPECT_EQ(labels[s], any);
    }
  }
  EXPECT_THROW(actual_segment_labels(std::vector<double>{1.0}, {{"a", "b"}}), Error);
}

TEST(SpScoreParse, Formats) {
  bool clamped = true;
  EXPECT_EQ(parse_sp_score("```json {\"score\": 7}```", &clamped), 7);
  EXPECT_FALSE(clamped);
  EXPECT_EQ(parse_sp_score("reasoning...\n'''json\n{\"score\": \"3\"}\n'''", &clamped), 3);
  EXPECT_EQ(parse_sp_score("Here: {\"score\": 0}", &clamped), 0);
  EXPECT_EQ(parse_sp_score("```{\"score\": 11}```", &clamped), 10);
  EXPECT_TRUE(clamped);
  EXPECT_EQ(parse_sp_score("```{\"score\": -4}```", &clamped), 0);
  EXPECT_TRUE(clamped);
}

TEST(SpScoreParse, FailuresKeepRawResponse) {
  bool clamped = false;
  for (const std::string raw : {"no json at all", "```json {\"rating\": 4}```",
                                "{\"score\": \"high\"}", "```json {score: 4}```"}) {
    try {
      parse_sp_score(raw, &clamped);
      FAIL() << raw;
    } catch (const SpScoreParseError& e) {
      EXPECT_EQ(e.raw_response(), raw);
      EXPECT_EQ(e.code(), ErrorCode::kSpScoreParse);
    }
  }
}

TEST(SpScore, ThroughMockBackend) {
  MockRules rules;
  rules.sp_score = 9;
  MockBackend b(rules);
  const auto r = sp_score(NeuronId{2, 3}, "violent threats", b, {});
  EXPECT_EQ(r.score, 9);
  EXPECT_FALSE(r.clamped);
  EXPECT_GT(r.generated_tokens, 0);
  rules.sp_response = "I refuse";
  MockBackend bad(rules);
  EXPECT_THROW(sp_score(NeuronId{2, 3}, "x", bad, {}), SpScoreParseError);
}

TEST(Cost, RelativeSavings) {
  EXPECT_NEAR(relative_savings(1358, 3057), 0.5558, 1e-4);
  EXPECT_DOUBLE_EQ(relative_savings(5, 5), 0.0);
  EXPECT_THROW(relative_savings(1, 0), Error);
}

TEST(Cost, ReportAveragesPerMethod) {
  std::vector<SimulationRun> runs(5);
  const long gen[] = {3000, 3114, 1300, 1416, 1358};
  const long prompt[] = {100, 300, 50, 70, 60};
  for (int i = 0; i < 5; ++i) {
    runs[i].method = i < 2 ? SimMethod::kTokenLevel : SimMethod::kSegmentLevel;
    runs[i].generated_tokens = gen[i];
    runs[i].prompt_tokens = prompt[i];
  }
  const auto rep = cost_report(runs);
  ASSERT_EQ(rep.methods.size(), 2u);
  EXPECT_EQ(rep.methods[0].method, SimMethod::kTokenLevel);
  EXPECT_DOUBLE_EQ(rep.methods[0].mean_generated_tokens, 3057.0);
  EXPECT_DOUBLE_EQ(rep.methods[1].mean_generated_tokens, 1358.0);
  EXPECT_DOUBLE_EQ(rep.methods[1].mean_prompt_tokens, 60.0);
  ASSERT_TRUE(rep.savings.has_value());
  EXPECT_NEAR(*rep.savings, 0.5558, 1e-4);
  EXPECT_NEAR(*rep.savings_total, 1.0 - 1418.0 / 3257.0, 1e-12);

  std::vector<SimulationRun> only_token(runs.begin(), runs.begin() + 2);
  EXPECT_FALSE(cost_report(only_token).savings.has_value());
  EXPECT_THROW(cost_report({}), Error);
}

TEST(Method, NamesRoundTrip) {
  for (auto m : {SimMethod::kAllAtOnce, SimMethod::kTokenLevel, SimMethod::kSegmentLevel}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_EQ(parse_method("token"), SimMethod::kTokenLevel);
  EXPECT_EQ(parse_method("segment"), SimMethod::kSegmentLevel);
  EXPECT_EQ(parse_method("all-at-once"), SimMethod::kAllAtOnce);
  EXPECT_THROW(parse_method("psychic"), Error);
}
