#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "saelab/concept_eval.hpp"
#include "saelab/error.hpp"
#include "saelab/rng.hpp"
#include "saelab/synthetic.hpp"

using namespace saelab;
using namespace saelab::concepts;

namespace {

std::vector<bool> bools(Rng& rng, std::size_t n, double p) {
  std::vector<bool> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform() < p;
  return v;
}

NeuronFreqTable table_of(std::vector<double> freq) {
  NeuronFreqTable t;
  t.freq = std::move(freq);
  t.n = 1;
  t.sum_qc.assign(t.freq.size(), 0);
  t.sum_qd.assign(t.freq.size(), 0);
  return t;
}

// Area under 1 - F on [0, 1] for the empirical CDF F, integrating the step
// function interval by interval.
double area_above_cdf(std::vector<double> freq) {
  std::sort(freq.begin(), freq.end());
  const double n = static_cast<double>(freq.size());
  double area = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i <= freq.size(); ++i) {
    const double x = i < freq.size() ? freq[i] : 1.0;
    area += (x - prev) * (1.0 - static_cast<double>(i) / n);
    prev = x;
  }
  return area;
}

}  // namespace

TEST(QueryFlags, FromLatents) {
  Matrix<float> lat(3, 4, 0.0f);
  EXPECT_EQ(flags_from_latents(lat, {0, 3}), std::vector<bool>(4, false));
  lat(1, 2) = 0.5f;
  EXPECT_EQ(flags_from_latents(lat, {1, 2}), (std::vector<bool>{false, false, true, false}));
  EXPECT_EQ(flags_from_latents(lat, {1, 2}, 0.5), std::vector<bool>(4, false));
  EXPECT_THROW(flags_from_latents(lat, {1, 1}), Error);
}

TEST(QueryFlags, MultiTokenMatchesPerTokenMax) {
  Rng rng(3);
  SaeConfig c;
  c.input_dim = 6;
  c.latent_dim = 20;
  c.topk = 4;
  c.seed = 3;
  const auto params = init_params(c);
  Matrix<float> X(30, 6);
  for (auto& v : X.storage()) v = static_cast<float>(rng.normal());
  for (std::size_t begin = 0; begin < 30; begin += 5) {
    const auto got = query_activation_flags(X, {begin, begin + 5}, params, 4);
    std::vector<double> max(20, 0.0);
    for (std::size_t r = begin; r < begin + 5; ++r) {
      const auto h = oracle::encode_dense(X.row(r), params, 4);
      for (std::size_t j = 0; j < 20; ++j) max[j] = std::max(max[j], h[j]);
    }
    for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(got[j], max[j] > 0.0);
  }
}

TEST(QueryFlags, PositiveScalingInvariant) {
  Rng rng(4);
  SaeConfig c;
  c.input_dim = 5;
  c.latent_dim = 12;
  c.topk = 3;
  const auto params = init_params(c);  // zero biases
  Matrix<float> X(8, 5), Y(8, 5);
  for (std::size_t i = 0; i < X.size(); ++i) {
    X.storage()[i] = static_cast<float>(rng.normal());
    Y.storage()[i] = X.storage()[i] * 4.0f;
  }
  EXPECT_EQ(query_activation_flags(X, {0, 8}, params, 3), query_activation_flags(Y, {0, 8}, params, 3));
}

TEST(DeltaFreq, DirectFormula) {
  std::vector<PairFlags> pairs{{{true}, {false}}, {{true}, {true}}, {{false}, {false}}, {{true}, {false}}};
  const auto t = delta_freq_from_flags("a/b", pairs);
  EXPECT_EQ(t.n, 4u);
  EXPECT_DOUBLE_EQ(t.freq[0], 0.5);
  EXPECT_EQ(t.sum_qc[0], 3u);
  EXPECT_EQ(t.sum_qd[0], 1u);

  std::vector<PairFlags> always(5, PairFlags{{true, true}, {true, true}});
  EXPECT_EQ(delta_freq_from_flags("x", always).freq, (std::vector<double>{0, 0}));
  EXPECT_THROW(delta_freq_from_flags("x", {}), Error);
}

TEST(DeltaFreq, MatchesPairLoopAndIsOrderInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(40), L = 1 + rng.below(30);
    std::vector<PairFlags> pairs(n);
    for (auto& p : pairs) {
      p.concept_flags = bools(rng, L, 0.5);
      p.deconcept_flags = bools(rng, L, 0.3);
    }
    const auto t = delta_freq_from_flags("c", pairs);
    for (std::size_t j = 0; j < L; ++j) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (pairs[i].concept_flags[j] && !pairs[i].deconcept_flags[j]) ++hits;
      }
      EXPECT_EQ(t.freq[j], static_cast<double>(hits) / static_cast<double>(n));
      EXPECT_GE(t.freq[j], 0.0);
      EXPECT_LE(t.freq[j], 1.0);
      EXPECT_LE(t.sum_qc[j], n);
    }
    rng.shuffle(std::span<PairFlags>(pairs));
    EXPECT_EQ(delta_freq_from_flags("c", pairs).freq, t.freq);
  }
}

TEST(DeltaFreq, FromSyntheticDump) {
  synth::SyntheticConfig cfg;
  cfg.pairs_per_concept = 6;
  cfg.pile_queries = 4;
  const auto corpus = synth::gen_synthetic(cfg);
  const auto sets = resolve_pairsets(corpus.pairs, corpus.dataset);
  ASSERT_EQ(sets.size(), 4u);
  for (const auto& s : sets) EXPECT_EQ(s.n(), 6u);
  const auto pooled = pool_by_level0(sets);
  ASSERT_EQ(pooled.size(), 3u);  // crime, sexual, hate
  for (const auto& s : pooled) {
    if (s.concept_name == "crime") EXPECT_EQ(s.n(), 12u);
  }

  SaeConfig c;
  c.input_dim = cfg.dim;
  c.latent_dim = 64;
  c.topk = 4;
  const auto params = init_params(c);
  const auto t = delta_freq(sets[0], corpus.dataset.data, params, 4);
  const auto latents = encode_rows(corpus.dataset.data, params, 4);
  std::vector<PairFlags> flags;
  for (const auto& p : sets[0].pairs) {
    flags.push_back({flags_from_latents(latents, p.concept_rows),
                     flags_from_latents(latents, p.deconcept_rows)});
  }
  EXPECT_EQ(t.freq, delta_freq_from_flags(sets[0].concept_name, flags).freq);

  auto bad = corpus.pairs;
  bad[0].concept_query_id = "missing";
  EXPECT_THROW(resolve_pairsets(bad, corpus.dataset), Error);
}

TEST(L0, StrictThreshold) {
  const auto t = table_of({0.3, 0.25, 0.1});
  EXPECT_EQ(l0_at_threshold(t, 0.25), 1u);
  EXPECT_EQ(l0_at_threshold(t, 1.0), 0u);
  EXPECT_EQ(l0_at_threshold(t, 0.0), 3u);
}

TEST(L0, NonIncreasingInThreshold) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> f(1 + rng.below(50));
    for (auto& v : f) v = rng.below(11) / 10.0;
    const auto t = table_of(f);
    std::size_t prev = l0_at_threshold(t, 0.0);
    for (int step = 1; step <= 100; ++step) {
      const auto cur = l0_at_threshold(t, step / 100.0);
      EXPECT_LE(cur, prev);
      prev = cur;
    }
  }
}

TEST(Icdf, Examples) {
  EXPECT_EQ(icdf(table_of({0, 0, 0})), 0.0);
  EXPECT_EQ(icdf(table_of({0, 1})), 0.5);
  EXPECT_THROW(icdf(table_of({})), Error);
}

TEST(Icdf, EqualsAreaAboveCdf) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f(1 + rng.below(100));
    for (auto& v : f) v = rng.coin() ? rng.uniform() : rng.below(5) / 4.0;
    EXPECT_NEAR(icdf(table_of(f)), area_above_cdf(f), 1e-12);
  }
}

TEST(Icdf, EmpiricalCdfSteps) {
  const auto pts = empirical_cdf(table_of({0.5, 0.0, 0.5, 0.25}));
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].x, 0.0);
  EXPECT_EQ(pts[0].cdf, 0.25);
  EXPECT_EQ(pts[1].x, 0.25);
  EXPECT_EQ(pts[1].cdf, 0.5);
  EXPECT_EQ(pts[2].x, 0.5);
  EXPECT_EQ(pts[2].cdf, 1.0);
  EXPECT_EQ(pts[3].x, 1.0);
}

TEST(PairRecords, RoundTrip) {
  std::vector<PairRecord> recs{{"crime/violence", "crime", "violence", "q1", "q2"},
                               {"hate/slur", "hate", "slur", "q3", "q4"}};
  const auto text = serialize_pair_records(recs);
  const auto back = parse_pair_records(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].deconcept_query_id, "q4");
  EXPECT_EQ(back[0].level1, "violence");
  EXPECT_THROW(parse_pair_records("{\"concept_name\": 3}\n"), Error);
}

TEST(FreqTables, RoundTrip) {
  std::vector<PairFlags> pairs{{{true, false}, {false, false}}, {{true, true}, {true, false}}};
  const auto t = delta_freq_from_flags("a/b", pairs);
  const auto back = parse_freq_tables(serialize_freq_tables({t}));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].freq, t.freq);
  EXPECT_EQ(back[0].sum_qc, t.sum_qc);
  EXPECT_EQ(back[0].sum_qd, t.sum_qd);
  EXPECT_EQ(back[0].n, 2u);
  EXPECT_EQ(back[0].concept_name, "a/b");
}
