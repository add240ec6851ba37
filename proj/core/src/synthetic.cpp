#include "saelab/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "saelab/error.hpp"
#include "saelab/rng.hpp"

namespace saelab::synth {

namespace {

const std::vector<std::string> kFiller = {
    " the",   " a",      " how",   " to",     " people", " about",  " story", " city",
    " write", " please", " tell",  " me",     " why",    " would",  " some",  " make",
    " old",   " new",    " plan",  " friend", " school", " online", " today", " help"};
const std::vector<std::string> kNeutral = {" weather", " garden", " recipe", " holiday"};

std::vector<float> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  double norm = 0.0;
  while (norm < 1e-9) {
    norm = 0.0;
    for (auto& x : v) {
      x = static_cast<float>(rng.normal());
      norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(norm);
  }
  for (auto& x : v) x = static_cast<float>(x / norm);
  return v;
}

struct Builder {
  const SyntheticConfig& config;
  Rng rng;
  std::map<std::string, std::vector<float>> embeddings;
  SyntheticCorpus out;

  const std::vector<float>& embedding(const std::string& word) {
    auto it = embeddings.find(word);
    if (it == embeddings.end()) {
      Rng word_rng(derive_seed(config.seed, 7 + embeddings.size()));
      it = embeddings.emplace(word, unit_vector(word_rng, config.dim)).first;
    }
    return it->second;
  }

  void append(const std::string& query_id, const std::vector<std::string>& tokens,
              const std::vector<const std::vector<float>*>& extra,
              const std::vector<std::string>& tags, Rng& noise_rng) {
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      std::vector<float> row(embedding(tokens[t]));
      for (auto& x : row) x = static_cast<float>(x + config.noise * noise_rng.normal());
      if (extra[t]) {
        for (std::size_t d = 0; d < config.dim; ++d) {
          row[d] += static_cast<float>(config.concept_strength * (*extra[t])[d]);
        }
      }
      out.dataset.data.append_row(row);
      ingest::RowMeta meta;
      meta.query_id = query_id;
      meta.token_index = static_cast<std::int64_t>(t);
      meta.token_text = tokens[t];
      meta.tags = tags;
      const double base = 2.0 + noise_rng.uniform();
      meta.ntp_loss_original = base;
      meta.ntp_loss_reconstructed = base + 0.05 * noise_rng.uniform();
      out.dataset.meta.push_back(std::move(meta));
    }
  }

  std::vector<std::string> filler(std::size_t n) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n; ++i) tokens.push_back(kFiller[rng.below(kFiller.size())]);
    return tokens;
  }

  std::size_t length() {
    return config.tokens_min + rng.below(config.tokens_max - config.tokens_min + 1);
  }
};

std::string numbered(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return prefix + buf;
}

}  // namespace

void SyntheticConfig::validate() const {
  require(dim >= 2, "synthetic dim must be at least 2");
  require(!concepts.empty(), "at least one concept is required");
  require(tokens_min >= 2 && tokens_min <= tokens_max, "invalid token length range");
  require(noise >= 0.0 && concept_strength > 0.0, "invalid noise or concept strength");
}

SyntheticCorpus gen_synthetic(const SyntheticConfig& config) {
  config.validate();
  Builder b{config, Rng(derive_seed(config.seed, 1)), {}, {}};
  b.out.dataset.data = Matrix<float>(0, config.dim);
  b.out.dataset.location = config.location;
  Rng dir_rng(derive_seed(config.seed, 2));
  for (std::size_t c = 0; c < config.concepts.size(); ++c) {
    b.out.concept_directions.push_back(unit_vector(dir_rng, config.dim));
  }
  Rng noise_rng(derive_seed(config.seed, 3));
  std::size_t query_no = 0;
  for (std::size_t c = 0; c < config.concepts.size(); ++c) {
    const auto& [level0, level1] = config.concepts[c];
    const std::string keyword = " " + level1;
    for (std::size_t p = 0; p < config.pairs_per_concept; ++p) {
      auto tokens = b.filler(b.length());
      const std::size_t pos = 1 + b.rng.below(tokens.size() - 1);
      auto twin = tokens;
      tokens[pos] = keyword;
      twin[pos] = kNeutral[b.rng.below(kNeutral.size())];
      std::vector<const std::vector<float>*> extra(tokens.size(), nullptr);
      extra[pos] = &b.out.concept_directions[c];
      const std::vector<const std::vector<float>*> none(tokens.size(), nullptr);
      const auto qc = numbered("q", query_no++);
      const auto qd = numbered("q", query_no++);
      b.append(qc, tokens, extra, {"risky", level0 + "/" + level1}, noise_rng);
      b.append(qd, twin, none, {"white"}, noise_rng);
      b.out.pairs.push_back(concepts::PairRecord{level0 + "/" + level1, level0, level1, qc, qd});
    }
  }
  for (std::size_t i = 0; i < config.pile_queries; ++i) {
    const auto tokens = b.filler(b.length());
    b.append(numbered("q", query_no++), tokens,
             std::vector<const std::vector<float>*>(tokens.size(), nullptr), {"pile"}, noise_rng);
  }
  b.out.dataset.validate();
  return std::move(b.out);
}

ingest::TraceFile trace_from_query(const ingest::ActivationDataset& dataset,
                                   const std::string& query_id, const std::vector<int>& layers) {
  require(!layers.empty(), "trace needs at least one layer");
  const auto index = ingest::query_index(dataset);
  const auto it = index.find(query_id);
  if (it == index.end()) fail(ErrorCode::kNotFound, "query " + query_id + " not in dataset");
  ingest::TraceFile trace;
  trace.query_id = query_id;
  for (std::size_t r = it->second.begin; r < it->second.end; ++r) {
    trace.tokens.push_back(dataset.meta[r].token_text);
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix<float> m(0, dataset.dim());
    const double scale = 1.0 + 0.25 * static_cast<double>(l);
    for (std::size_t r = it->second.begin; r < it->second.end; ++r) {
      std::vector<float> row(dataset.data.row(r).begin(), dataset.data.row(r).end());
      for (auto& x : row) x = static_cast<float>(x * scale);
      m.append_row(row);
    }
    trace.layers.emplace(layers[l], std::move(m));
  }
  trace.validate();
  return trace;
}

}  // namespace saelab::synth
