#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saelab/concept_eval.hpp"
#include "saelab/dataset.hpp"

namespace saelab::synth {

// Hidden-state corpus with planted concept directions: every concept query
// carries its concept's keyword token, whose vector adds that concept's
// direction; its twin swaps the keyword for a neutral word.
struct SyntheticConfig {
  std::size_t dim = 32;
  // (level0, level1) pairs; level1 doubles as the keyword.
  std::vector<std::pair<std::string, std::string>> concepts = {
      {"crime", "violence"}, {"crime", "fraud"}, {"sexual", "pornography"}, {"hate", "slur"}};
  std::size_t pairs_per_concept = 24;
  std::size_t pile_queries = 48;
  std::size_t tokens_min = 6;
  std::size_t tokens_max = 14;
  double noise = 0.3;
  double concept_strength = 3.0;
  std::uint64_t seed = 0;
  std::string location = "mlp_out";

  void validate() const;
};

struct SyntheticCorpus {
  ingest::ActivationDataset dataset;
  std::vector<concepts::PairRecord> pairs;
  std::vector<std::vector<float>> concept_directions;  // unit, one per concept
};

SyntheticCorpus gen_synthetic(const SyntheticConfig& config);

// A trace for one dataset query with the same rows repeated on each layer,
// scaled by (1 + 0.25 * position of the layer).
ingest::TraceFile trace_from_query(const ingest::ActivationDataset& dataset,
                                   const std::string& query_id, const std::vector<int>& layers);

}  // namespace saelab::synth
