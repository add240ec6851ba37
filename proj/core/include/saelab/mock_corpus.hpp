#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "saelab/backend.hpp"
#include "saelab/explain_sim.hpp"

namespace saelab::explain {

// Queries plus keyword-driven neurons whose activations are exact multiples
// of a_max / 10, so a mock backend holding the same rules simulates them
// perfectly.
struct MockNeuron {
  NeuronId id;
  std::string explanation;
  double a_max = 1.0;
  std::vector<std::pair<std::string, int>> levels;  // substring -> level
};

struct MockQuery {
  std::string query_id;
  std::vector<std::string> tokens;
};

struct MockCorpus {
  std::vector<MockNeuron> neurons;
  std::vector<MockQuery> queries;

  // Level of a token: max over the neuron's matching substrings, else 0.
  static int level_of(const MockNeuron& neuron, const std::string& token);
  // Actual activations level * a_max / 10 for every query, binned.
  std::vector<ActivationExample> examples(const MockNeuron& neuron) const;
  // Backend rules reproducing this neuron exactly.
  MockRules rules(const MockNeuron& neuron) const;
};

MockCorpus gen_mock_corpus(std::uint64_t seed = 0, std::size_t n_queries = 50);
std::string serialize_mock_corpus(const MockCorpus& corpus);
MockCorpus parse_mock_corpus(const std::string& text);
MockCorpus load_mock_corpus(const std::filesystem::path& path);

}  // namespace saelab::explain
