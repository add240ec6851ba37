#include "saelab/neuron_filter.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

#include "saelab/error.hpp"

namespace saelab::filter {

using nlohmann::json;

void FilterThresholds::validate() const {
  require(precision_min >= 0.0 && precision_min <= 1.0, "precision_min must be in [0, 1]");
  require(recall_min >= 0.0 && recall_min <= 1.0, "recall_min must be in [0, 1]");
}

PrecisionRecall precision_recall(std::uint64_t sum_qc, std::uint64_t sum_qd,
                                 std::uint64_t n) {
  require(n >= 1, "n must be positive");
  require(sum_qc <= n && sum_qd <= n, "activation counts exceed n");
  if (sum_qc + sum_qd == 0) {
    fail(ErrorCode::kUndefinedPrecision, "neuron never activates; precision undefined");
  }
  return {static_cast<double>(sum_qc) / static_cast<double>(sum_qc + sum_qd),
          static_cast<double>(sum_qc) / static_cast<double>(n)};
}

std::vector<Candidate> filter_neurons(std::span<const concepts::NeuronFreqTable> tables,
                                      const FilterThresholds& thresholds) {
  thresholds.validate();
  require(!tables.empty(), "at least one concept table is required");
  std::vector<Candidate> out;
  for (const auto& t : tables) {
    require(t.sum_qc.size() == t.sum_qd.size(), "table counters differ in length");
    for (std::size_t j = 0; j < t.sum_qc.size(); ++j) {
      if (t.sum_qc[j] + t.sum_qd[j] == 0) continue;
      const auto pr = precision_recall(t.sum_qc[j], t.sum_qd[j], t.n);
      if (pr.precision >= thresholds.precision_min && pr.recall >= thresholds.recall_min) {
        out.push_back({static_cast<std::uint32_t>(j), t.concept_name, pr.precision, pr.recall});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.precision != b.precision) return a.precision > b.precision;
    if (a.recall != b.recall) return a.recall > b.recall;
    if (a.neuron != b.neuron) return a.neuron < b.neuron;
    return a.concept_name < b.concept_name;
  });
  return out;
}

std::string serialize_candidates(const std::vector<Candidate>& candidates, int layer) {
  std::string out;
  for (const auto& c : candidates) {
    out += json{{"layer", layer},
                {"neuron", c.neuron},
                {"concept_name", c.concept_name},
                {"precision", c.precision},
                {"recall", c.recall}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<Candidate> parse_candidates(std::string_view text, int* layer) {
  std::vector<Candidate> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto rec = json::parse(line);
      Candidate c;
      c.neuron = rec.at("neuron").get<std::uint32_t>();
      c.concept_name = rec.value("concept_name", "");
      c.precision = rec.value("precision", 0.0);
      c.recall = rec.value("recall", 0.0);
      if (layer != nullptr) *layer = rec.value("layer", 0);
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidInput, std::string("candidate record: ") + e.what());
    }
  }
  return out;
}

}  // namespace saelab::filter
