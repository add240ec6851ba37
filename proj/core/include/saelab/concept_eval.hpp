#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "saelab/dataset.hpp"
#include "saelab/matrix.hpp"
#include "saelab/sae.hpp"

namespace saelab::concepts {

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

struct QueryPair {
  RowRange concept_rows;
  RowRange deconcept_rows;
  std::string concept_query_id;
  std::string deconcept_query_id;
};

struct ConceptPairSet {
  std::string concept_name;  // "level0/level1"
  std::string level0;
  std::string level1;
  std::vector<QueryPair> pairs;

  std::size_t n() const noexcept { return pairs.size(); }
  void validate() const;
};

// One line of a pairset file.
struct PairRecord {
  std::string concept_name;
  std::string level0;
  std::string level1;
  std::string concept_query_id;
  std::string deconcept_query_id;
};

std::vector<PairRecord> parse_pair_records(std::string_view text);
std::string serialize_pair_records(const std::vector<PairRecord>& records);
std::vector<PairRecord> load_pair_records(const std::string& path);

// Groups records by concept_name and resolves query ids to row ranges.
std::vector<ConceptPairSet> resolve_pairsets(const std::vector<PairRecord>& records,
                                             const ingest::ActivationDataset& dataset);

// Pools the subclasses of every level-0 concept into one pairset.
std::vector<ConceptPairSet> pool_by_level0(const std::vector<ConceptPairSet>& pairsets);

// flag[j] is true iff latent j exceeds epsilon on at least one token of the query.
std::vector<bool> query_activation_flags(const Matrix<float>& data, RowRange rows,
                                         const SaeParams& params, std::size_t k,
                                         double epsilon = 0.0);

// Same rule over precomputed latents (rows x L).
std::vector<bool> flags_from_latents(const Matrix<float>& latents, RowRange rows,
                                     double epsilon = 0.0);

struct NeuronFreqTable {
  std::string concept_name;
  std::size_t n = 0;
  std::vector<double> freq;
  std::vector<std::uint32_t> sum_qc;
  std::vector<std::uint32_t> sum_qd;
};

struct PairFlags {
  std::vector<bool> concept_flags;
  std::vector<bool> deconcept_flags;
};

// One table per line: {"concept_name", "n", "freq", "sum_qc", "sum_qd"}.
std::string serialize_freq_tables(const std::vector<NeuronFreqTable>& tables);
std::vector<NeuronFreqTable> parse_freq_tables(std::string_view text);

NeuronFreqTable delta_freq_from_flags(const std::string& concept_name,
                                      const std::vector<PairFlags>& pairs);

NeuronFreqTable delta_freq(const ConceptPairSet& pairset, const Matrix<float>& data,
                           const SaeParams& params, std::size_t k,
                           double epsilon = 0.0);

// Number of neurons with freq strictly above t.
std::size_t l0_at_threshold(const NeuronFreqTable& table, double t);

// Mean delta frequency, i.e. the area above the empirical CDF on [0, 1].
double icdf(const NeuronFreqTable& table);

struct CdfPoint {
  double x = 0.0;
  double cdf = 0.0;  // P(freq <= x)
};

// Step points of the empirical CDF at each distinct freq value, plus x = 1.
std::vector<CdfPoint> empirical_cdf(const NeuronFreqTable& table);

}  // namespace saelab::concepts
