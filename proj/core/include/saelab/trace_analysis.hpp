#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saelab/checkpoint.hpp"
#include "saelab/dataset.hpp"
#include "saelab/neuron_db.hpp"

namespace saelab::db {

struct CheckpointSet {
  std::map<int, Checkpoint> by_layer;
  std::vector<std::string> warnings;
};

// Loads every layer_<L>.ckpt in `dir`; unreadable files become warnings.
CheckpointSet load_checkpoint_dir(const std::filesystem::path& dir);

struct ActivatedNeuron {
  int layer = 0;
  std::uint32_t index = 0;
  double activation = 0.0;
  double normalized = 0.0;
  // Normalized by the trace maximum because no dataset maximum was recorded.
  bool fallback_normalization = false;
  bool known = false;  // present in the neuron database
  std::string explanation;
  double corr_score = 0.0;
};

struct TokenActivations {
  std::size_t token_index = 0;
  std::string token;
  std::vector<ActivatedNeuron> neurons;  // normalized descending
};

struct TraceAnalysis {
  std::string query_id;
  std::vector<int> layers;  // analyzed, ascending
  std::vector<TokenActivations> tokens;
  std::vector<std::string> warnings;
};

// Encodes every token through the checkpoint of its layer and keeps the top_m
// activated neurons per token across layers. Read-only.
TraceAnalysis analyze_trace(const ingest::TraceFile& trace, const CheckpointSet& checkpoints,
                            const NeuronDb& db, std::size_t top_m);

struct ChainNeuron {
  std::uint32_t index = 0;
  double total_normalized = 0.0;  // summed over tokens in the region
  std::size_t token_count = 0;    // tokens where it was in the top_m
  bool known = false;
  std::string explanation;
  double corr_score = 0.0;
};

struct ChainLayer {
  int layer = 0;
  std::vector<ChainNeuron> neurons;  // total_normalized descending
};

struct ActivationChain {
  std::string query_id;
  std::size_t region_begin = 0;
  std::size_t region_end = 0;
  std::vector<ChainLayer> layers;  // ascending
  std::vector<std::string> warnings;
};

struct ChainOptions {
  std::size_t top_m = 10;  // per token, as in analyze_trace
  std::size_t top_n = 5;   // per layer in the chain
  std::optional<std::size_t> region_begin;
  std::optional<std::size_t> region_end;
};

// Aggregates an analysis per layer over a token region.
ActivationChain chain_from_analysis(const TraceAnalysis& analysis, const ChainOptions& options);

ActivationChain activation_chain(const ingest::TraceFile& trace, const CheckpointSet& checkpoints,
                                 const NeuronDb& db, const ChainOptions& options);

nlohmann::json to_json(const TraceAnalysis& analysis);
nlohmann::json to_json(const ActivationChain& chain);

}  // namespace saelab::db
