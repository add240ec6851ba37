#include "saelab/mock_corpus.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"
#include "saelab/rng.hpp"

namespace saelab::explain {

using nlohmann::json;

namespace {

const std::vector<std::string> kWords = {
    " I",      " want",   " to",     " know",   " how",    " the",    " a",     " my",
    " can",    " you",    " explain", " what",  " people", " in",     " city",  " story",
    " about",  " write",  " for",    " school", " friend", " night",  " with",  " old",
    " some",   " please", " find",   " best",   " way",    " home",   " is",    " it"};

const std::vector<MockNeuron> kNeurons = {
    {{17, 101}, "words about violent harm such as kill, attack and weapons", 4.2,
     {{"kill", 10}, {"attack", 7}, {"weapon", 5}, {"fight", 3}}},
    {{17, 2048}, "references to illegal drugs and their preparation", 2.5,
     {{"cocaine", 10}, {"heroin", 9}, {"drug", 6}, {"pill", 2}}},
    {{21, 77}, "financial deception, scams and stolen credentials", 6.0,
     {{"scam", 10}, {"fraud", 8}, {"password", 6}, {"bank", 4}}},
    {{21, 900}, "a neuron that stays silent on this corpus", 1.0, {{"zeppelin", 10}}},
};

const std::vector<std::string> kKeywords = {" kill",    " attack", " weapon", " fight",
                                            " cocaine", " heroin", " drug",   " pill",
                                            " scam",    " fraud",  " password", " bank"};

}  // namespace

int MockCorpus::level_of(const MockNeuron& neuron, const std::string& token) {
  int level = 0;
  for (const auto& [needle, v] : neuron.levels) {
    if (token.find(needle) != std::string::npos) level = std::max(level, v);
  }
  return level;
}

std::vector<ActivationExample> MockCorpus::examples(const MockNeuron& neuron) const {
  std::vector<ActivationExample> out;
  for (const auto& q : queries) {
    ActivationExample ex;
    ex.query_id = q.query_id;
    ex.tokens = q.tokens;
    for (const auto& t : q.tokens) {
      const int level = level_of(neuron, t);
      ex.activations.push_back(level * neuron.a_max / 10.0);
      ex.token_bins.push_back(level);
      ex.bin = std::max(ex.bin, level);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

MockRules MockCorpus::rules(const MockNeuron& neuron) const {
  MockRules r;
  r.levels = neuron.levels;
  r.explanation = neuron.explanation;
  return r;
}

MockCorpus gen_mock_corpus(std::uint64_t seed, std::size_t n_queries) {
  Rng rng(derive_seed(seed, 11));
  MockCorpus corpus;
  corpus.neurons = kNeurons;
  for (std::size_t i = 0; i < n_queries; ++i) {
    MockQuery q;
    char id[32];
    std::snprintf(id, sizeof(id), "mq-%03zu", i);
    q.query_id = id;
    const std::size_t len = 12 + rng.below(19);
    for (std::size_t t = 0; t < len; ++t) q.tokens.push_back(kWords[rng.below(kWords.size())]);
    // Roughly a fifth of the queries stay keyword-free.
    if (rng.below(5) != 0) {
      const std::size_t n_kw = 1 + rng.below(3);
      for (std::size_t k = 0; k < n_kw; ++k) {
        q.tokens[rng.below(len)] = kKeywords[rng.below(kKeywords.size())];
      }
    }
    corpus.queries.push_back(std::move(q));
  }
  return corpus;
}

std::string serialize_mock_corpus(const MockCorpus& corpus) {
  json neurons = json::array();
  for (const auto& n : corpus.neurons) {
    json levels = json::array();
    for (const auto& [needle, v] : n.levels) levels.push_back({needle, v});
    neurons.push_back({{"layer", n.id.layer},
                       {"index", n.id.index},
                       {"explanation", n.explanation},
                       {"a_max", n.a_max},
                       {"levels", levels}});
  }
  std::string out = json{{"format", "saelab-mock-corpus"}, {"version", 1}, {"neurons", neurons}}.dump();
  out.push_back('\n');
  for (const auto& q : corpus.queries) {
    out += json{{"query_id", q.query_id}, {"tokens", q.tokens}}.dump();
    out.push_back('\n');
  }
  return out;
}

MockCorpus parse_mock_corpus(const std::string& text) {
  MockCorpus corpus;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  try {
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const auto line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;
      const auto j = json::parse(line);
      if (line_no++ == 0) {
        if (j.value("format", "") != "saelab-mock-corpus" || j.value("version", 0) != 1) {
          fail(ErrorCode::kInvalidInput, "not a mock corpus file");
        }
        for (const auto& n : j.at("neurons")) {
          MockNeuron neuron;
          neuron.id = NeuronId{n.at("layer").get<int>(), n.at("index").get<std::uint32_t>()};
          neuron.explanation = n.at("explanation").get<std::string>();
          neuron.a_max = n.at("a_max").get<double>();
          require(neuron.a_max > 0.0, "mock neuron a_max must be positive");
          for (const auto& lv : n.at("levels")) {
            neuron.levels.emplace_back(lv.at(0).get<std::string>(), lv.at(1).get<int>());
          }
          corpus.neurons.push_back(std::move(neuron));
        }
        continue;
      }
      corpus.queries.push_back(
          MockQuery{j.at("query_id").get<std::string>(), j.at("tokens").get<std::vector<std::string>>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidInput, "mock corpus line " + std::to_string(line_no) + ": " + e.what());
  }
  require(line_no > 0, "mock corpus is empty");
  return corpus;
}

MockCorpus load_mock_corpus(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path.string());
  return parse_mock_corpus(std::string(bytes.begin(), bytes.end()));
}

}  // namespace saelab::explain
