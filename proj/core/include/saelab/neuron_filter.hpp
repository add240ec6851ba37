#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saelab/concept_eval.hpp"

namespace saelab::filter {

struct FilterThresholds {
  double precision_min = 0.75;
  double recall_min = 0.2;

  void validate() const;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// precision = QC / (QC + QD), recall = QC / n. Throws kUndefinedPrecision
// when the neuron never fires on either side.
PrecisionRecall precision_recall(std::uint64_t sum_qc, std::uint64_t sum_qd,
                                 std::uint64_t n);

struct Candidate {
  std::uint32_t neuron = 0;
  std::string concept_name;
  double precision = 0.0;
  double recall = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Every (neuron, concept) meeting both thresholds (inclusive), ordered by
// precision desc, recall desc, neuron id, concept name.
std::vector<Candidate> filter_neurons(std::span<const concepts::NeuronFreqTable> tables,
                                      const FilterThresholds& thresholds);

std::string serialize_candidates(const std::vector<Candidate>& candidates, int layer);
std::vector<Candidate> parse_candidates(std::string_view text, int* layer = nullptr);

}  // namespace saelab::filter
