#include <gtest/gtest.h>

#include "saelab/error.hpp"
#include "saelab/mock_corpus.hpp"
#include "test_util.hpp"

using namespace saelab;
using namespace saelab::explain;

TEST(MockCorpus, ShippedFileMatchesGenerator) {
  const auto path = testutil::source_dir() / "data" / "mock_corpus.jsonl";
  EXPECT_EQ(testutil::slurp(path), serialize_mock_corpus(gen_mock_corpus(0, 50)));
}

TEST(MockCorpus, RoundTrip) {
  const auto c = gen_mock_corpus(4, 20);
  const auto text = serialize_mock_corpus(c);
  EXPECT_EQ(serialize_mock_corpus(parse_mock_corpus(text)), text);
}

TEST(MockCorpus, ExamplesAreExactLevelMultiples) {
  const auto c = gen_mock_corpus(1, 40);
  for (const auto& n : c.neurons) {
    for (const auto& ex : c.examples(n)) {
      ex.validate();
      for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
        const int level = MockCorpus::level_of(n, ex.tokens[i]);
        EXPECT_EQ(ex.token_bins[i], level);
        EXPECT_DOUBLE_EQ(ex.activations[i], level * n.a_max / 10.0);
      }
    }
  }
}

TEST(MockCorpus, SomeQueriesFireAndSomeDoNot) {
  const auto c = gen_mock_corpus(0, 50);
  const auto ex = c.examples(c.neurons[0]);
  std::size_t firing = 0;
  for (const auto& e : ex) firing += e.bin > 0;
  EXPECT_GT(firing, 0u);
  EXPECT_LT(firing, ex.size());
}

TEST(MockCorpus, ParseRejectsWrongHeader) {
  EXPECT_THROW(parse_mock_corpus(R"({"format": "other", "version": 1, "neurons": []})"), Error);
  EXPECT_THROW(parse_mock_corpus(""), Error);
  EXPECT_THROW(parse_mock_corpus("{broken"), Error);
}
