#include "saelab/trace_analysis.hpp"

#include <algorithm>
#include <regex>

#include "saelab/error.hpp"

namespace saelab::db {

using nlohmann::json;

CheckpointSet load_checkpoint_dir(const std::filesystem::path& dir) {
  CheckpointSet out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    out.warnings.push_back("checkpoint directory " + dir.string() + " not found");
    return out;
  }
  static const std::regex name_re(R"(layer_(\d+)\.ckpt)");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::smatch m;
    const std::string name = path.filename().string();
    if (!std::regex_match(name, m, name_re)) continue;
    const int layer = std::stoi(m[1].str());
    try {
      out.by_layer.emplace(layer, load_checkpoint(path.string()));
    } catch (const std::exception& e) {
      out.warnings.push_back("layer " + std::to_string(layer) + ": " + e.what());
    }
  }
  return out;
}

TraceAnalysis analyze_trace(const ingest::TraceFile& trace, const CheckpointSet& checkpoints,
                            const NeuronDb& db, std::size_t top_m) {
  require(top_m >= 1, "top_m must be at least 1");
  trace.validate();
  TraceAnalysis out;
  out.query_id = trace.query_id;
  out.warnings = checkpoints.warnings;

  struct Hit {
    int layer;
    std::uint32_t index;
    double activation;
  };
  std::vector<std::vector<Hit>> per_token(trace.tokens.size());
  std::map<std::pair<int, std::uint32_t>, double> trace_max;
  for (const auto& [layer, vectors] : trace.layers) {
    const auto ck = checkpoints.by_layer.find(layer);
    if (ck == checkpoints.by_layer.end()) {
      out.warnings.push_back("layer " + std::to_string(layer) + ": no checkpoint; skipped");
      continue;
    }
    const auto& params = ck->second.params;
    if (params.input_dim() != vectors.cols()) {
      out.warnings.push_back("layer " + std::to_string(layer) + ": checkpoint expects dimension " +
                             std::to_string(params.input_dim()) + " but the trace has " +
                             std::to_string(vectors.cols()) + "; skipped");
      continue;
    }
    out.layers.push_back(layer);
    for (std::size_t t = 0; t < vectors.rows(); ++t) {
      const auto h = encode(vectors.row(t), params, ck->second.config.topk);
      for (auto j : h.support) {
        const double a = h.values[j];
        if (!(a > 0.0)) continue;
        per_token[t].push_back(Hit{layer, j, a});
        auto& m = trace_max[{layer, j}];
        m = std::max(m, a);
      }
    }
  }

  std::map<std::pair<int, std::uint32_t>, std::optional<NeuronRecord>> records;
  for (const auto& [key, m] : trace_max) records[key] = db.get(key.first, key.second);

  for (std::size_t t = 0; t < trace.tokens.size(); ++t) {
    TokenActivations tok;
    tok.token_index = t;
    tok.token = trace.tokens[t];
    for (const auto& hit : per_token[t]) {
      ActivatedNeuron n;
      n.layer = hit.layer;
      n.index = hit.index;
      n.activation = hit.activation;
      const auto& rec = records.at({hit.layer, hit.index});
      if (rec) {
        n.known = true;
        n.explanation = rec->explanation;
        n.corr_score = rec->corr_score;
      }
      if (rec && rec->max_activation > 0.0) {
        n.normalized = hit.activation / rec->max_activation;
      } else {
        n.normalized = hit.activation / trace_max.at({hit.layer, hit.index});
        n.fallback_normalization = true;
      }
      tok.neurons.push_back(std::move(n));
    }
    std::sort(tok.neurons.begin(), tok.neurons.end(),
              [](const ActivatedNeuron& a, const ActivatedNeuron& b) {
                if (a.normalized != b.normalized) return a.normalized > b.normalized;
                if (a.layer != b.layer) return a.layer < b.layer;
                return a.index < b.index;
              });
    if (tok.neurons.size() > top_m) tok.neurons.resize(top_m);
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

ActivationChain chain_from_analysis(const TraceAnalysis& analysis, const ChainOptions& options) {
  require(options.top_n >= 1, "top_n must be at least 1");
  ActivationChain chain;
  chain.query_id = analysis.query_id;
  chain.warnings = analysis.warnings;
  chain.region_begin = options.region_begin.value_or(0);
  chain.region_end = std::min(options.region_end.value_or(analysis.tokens.size()),
                              analysis.tokens.size());
  require(chain.region_begin <= chain.region_end, "chain region is empty or reversed");
  if (analysis.layers.size() < 2) {
    chain.warnings.push_back("fewer than two layers analyzed; chain is degenerate");
  }
  std::map<int, std::map<std::uint32_t, ChainNeuron>> acc;
  for (int layer : analysis.layers) acc[layer];
  for (std::size_t t = chain.region_begin; t < chain.region_end; ++t) {
    for (const auto& n : analysis.tokens[t].neurons) {
      auto& c = acc[n.layer][n.index];
      c.index = n.index;
      c.total_normalized += n.normalized;
      ++c.token_count;
      c.known = n.known;
      c.explanation = n.explanation;
      c.corr_score = n.corr_score;
    }
  }
  for (auto& [layer, neurons] : acc) {
    ChainLayer cl;
    cl.layer = layer;
    for (auto& [index, c] : neurons) cl.neurons.push_back(std::move(c));
    std::stable_sort(cl.neurons.begin(), cl.neurons.end(),
                     [](const ChainNeuron& a, const ChainNeuron& b) {
                       return a.total_normalized > b.total_normalized;
                     });
    if (cl.neurons.size() > options.top_n) cl.neurons.resize(options.top_n);
    chain.layers.push_back(std::move(cl));
  }
  return chain;
}

ActivationChain activation_chain(const ingest::TraceFile& trace, const CheckpointSet& checkpoints,
                                 const NeuronDb& db, const ChainOptions& options) {
  return chain_from_analysis(analyze_trace(trace, checkpoints, db, options.top_m), options);
}

json to_json(const TraceAnalysis& analysis) {
  json tokens = json::array();
  for (const auto& tok : analysis.tokens) {
    json neurons = json::array();
    for (const auto& n : tok.neurons) {
      neurons.push_back({{"layer", n.layer},
                         {"index", n.index},
                         {"activation", n.activation},
                         {"normalized", n.normalized},
                         {"fallback_normalization", n.fallback_normalization},
                         {"known", n.known},
                         {"explanation", n.explanation},
                         {"corr_score", n.corr_score}});
    }
    tokens.push_back({{"token_index", tok.token_index}, {"token", tok.token}, {"neurons", neurons}});
  }
  return json{{"query_id", analysis.query_id},
              {"layers", analysis.layers},
              {"tokens", tokens},
              {"warnings", analysis.warnings}};
}

json to_json(const ActivationChain& chain) {
  json layers = json::array();
  for (const auto& layer : chain.layers) {
    json neurons = json::array();
    for (const auto& n : layer.neurons) {
      neurons.push_back({{"index", n.index},
                         {"total_normalized", n.total_normalized},
                         {"token_count", n.token_count},
                         {"known", n.known},
                         {"explanation", n.explanation},
                         {"corr_score", n.corr_score}});
    }
    layers.push_back({{"layer", layer.layer}, {"neurons", neurons}});
  }
  return json{{"query_id", chain.query_id},
              {"region", {{"begin", chain.region_begin}, {"end", chain.region_end}}},
              {"layers", layers},
              {"warnings", chain.warnings}};
}

}  // namespace saelab::db
