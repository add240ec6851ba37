#include "saelab/concept_eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "saelab/error.hpp"

namespace saelab::concepts {

using nlohmann::json;

void ConceptPairSet::validate() const {
  require(!pairs.empty(), "pairset '" + concept_name + "' is empty");
  for (const auto& p : pairs) {
    require(p.concept_rows.size() > 0 && p.deconcept_rows.size() > 0,
            "pairset '" + concept_name + "' has an empty query");
    const bool disjoint = p.concept_rows.end <= p.deconcept_rows.begin ||
                          p.deconcept_rows.end <= p.concept_rows.begin;
    require(disjoint, "pairset '" + concept_name + "' has overlapping query rows");
  }
}

std::vector<PairRecord> parse_pair_records(std::string_view text) {
  std::vector<PairRecord> out;
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto rec = json::parse(line);
      PairRecord r;
      r.level0 = rec.value("level0", "");
      r.level1 = rec.value("level1", "");
      r.concept_name = rec.value("concept_name", "");
      if (r.concept_name.empty()) r.concept_name = r.level0 + "/" + r.level1;
      r.concept_query_id = rec.at("concept_query_id").get<std::string>();
      r.deconcept_query_id = rec.at("deconcept_query_id").get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidInput, "pairset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string serialize_pair_records(const std::vector<PairRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"concept_name", r.concept_name},
                {"level0", r.level0},
                {"level1", r.level1},
                {"concept_query_id", r.concept_query_id},
                {"deconcept_query_id", r.deconcept_query_id}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<PairRecord> load_pair_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pair_records(ss.str());
}

std::vector<ConceptPairSet> resolve_pairsets(const std::vector<PairRecord>& records,
                                             const ingest::ActivationDataset& dataset) {
  const auto index = ingest::query_index(dataset);
  auto lookup = [&](const std::string& id) {
    const auto it = index.find(id);
    if (it == index.end()) {
      fail(ErrorCode::kInvalidInput, "query id '" + id + "' is not in the dump");
    }
    return RowRange{it->second.begin, it->second.end};
  };
  std::vector<ConceptPairSet> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& r : records) {
    auto [it, inserted] = slot.emplace(r.concept_name, out.size());
    if (inserted) out.push_back({r.concept_name, r.level0, r.level1, {}});
    out[it->second].pairs.push_back(
        {lookup(r.concept_query_id), lookup(r.deconcept_query_id), r.concept_query_id,
         r.deconcept_query_id});
  }
  for (const auto& ps : out) ps.validate();
  return out;
}

std::vector<ConceptPairSet> pool_by_level0(const std::vector<ConceptPairSet>& pairsets) {
  std::vector<ConceptPairSet> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& ps : pairsets) {
    const std::string key = ps.level0.empty() ? ps.concept_name : ps.level0;
    auto [it, inserted] = slot.emplace(key, out.size());
    if (inserted) out.push_back({key, key, "", {}});
    auto& dst = out[it->second].pairs;
    dst.insert(dst.end(), ps.pairs.begin(), ps.pairs.end());
  }
  return out;
}

std::vector<bool> query_activation_flags(const Matrix<float>& data, RowRange rows,
                                         const SaeParams& params, std::size_t k,
                                         double epsilon) {
  require(rows.size() > 0, "query has no rows");
  require(rows.end <= data.rows(), "query rows are out of range");
  require(data.cols() == params.input_dim(), "data dimension does not match the SAE");
  std::vector<bool> flags(params.latent_dim(), false);
  for (std::size_t r = rows.begin; r < rows.end; ++r) {
    const auto h = encode(data.row(r), params, k);
    for (auto j : h.support) {
      if (h.values[j] > epsilon) flags[j] = true;
    }
  }
  return flags;
}

std::vector<bool> flags_from_latents(const Matrix<float>& latents, RowRange rows,
                                     double epsilon) {
  require(rows.size() > 0, "query has no rows");
  require(rows.end <= latents.rows(), "query rows are out of range");
  std::vector<bool> flags(latents.cols(), false);
  for (std::size_t r = rows.begin; r < rows.end; ++r) {
    const auto row = latents.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] > epsilon) flags[j] = true;
    }
  }
  return flags;
}

NeuronFreqTable delta_freq_from_flags(const std::string& concept_name,
                                      const std::vector<PairFlags>& pairs) {
  require(!pairs.empty(), "pairset '" + concept_name + "' is empty");
  const std::size_t latents = pairs.front().concept_flags.size();
  NeuronFreqTable t;
  t.concept_name = concept_name;
  t.n = pairs.size();
  t.freq.assign(latents, 0.0);
  t.sum_qc.assign(latents, 0);
  t.sum_qd.assign(latents, 0);
  std::vector<std::uint32_t> hits(latents, 0);
  for (const auto& p : pairs) {
    require(p.concept_flags.size() == latents && p.deconcept_flags.size() == latents,
            "flag vectors differ in length");
    for (std::size_t j = 0; j < latents; ++j) {
      const bool qc = p.concept_flags[j];
      const bool qd = p.deconcept_flags[j];
      t.sum_qc[j] += qc;
      t.sum_qd[j] += qd;
      hits[j] += qc && !qd;
    }
  }
  for (std::size_t j = 0; j < latents; ++j) {
    t.freq[j] = static_cast<double>(hits[j]) / static_cast<double>(t.n);
  }
  return t;
}

NeuronFreqTable delta_freq(const ConceptPairSet& pairset, const Matrix<float>& data,
                           const SaeParams& params, std::size_t k, double epsilon) {
  pairset.validate();
  std::vector<PairFlags> flags;
  flags.reserve(pairset.n());
  for (const auto& p : pairset.pairs) {
    flags.push_back({query_activation_flags(data, p.concept_rows, params, k, epsilon),
                     query_activation_flags(data, p.deconcept_rows, params, k, epsilon)});
  }
  return delta_freq_from_flags(pairset.concept_name, flags);
}

std::size_t l0_at_threshold(const NeuronFreqTable& table, double t) {
  return static_cast<std::size_t>(std::count_if(table.freq.begin(), table.freq.end(),
                                                [t](double f) { return f > t; }));
}

double icdf(const NeuronFreqTable& table) {
  require(!table.freq.empty(), "frequency table is empty");
  double sum = 0.0;
  for (double f : table.freq) sum += f;
  return sum / static_cast<double>(table.freq.size());
}

std::vector<CdfPoint> empirical_cdf(const NeuronFreqTable& table) {
  require(!table.freq.empty(), "frequency table is empty");
  auto sorted = table.freq;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  if (out.back().x < 1.0) out.push_back({1.0, 1.0});
  return out;
}

}  // namespace saelab::concepts

namespace saelab::concepts {

std::string serialize_freq_tables(const std::vector<NeuronFreqTable>& tables) {
  std::string out;
  for (const auto& t : tables) {
    out += json{{"concept_name", t.concept_name},
                {"n", t.n},
                {"freq", t.freq},
                {"sum_qc", t.sum_qc},
                {"sum_qd", t.sum_qd}}
               .dump();
    out += '\n';
  }
  return out;
}

std::vector<NeuronFreqTable> parse_freq_tables(std::string_view text) {
  std::vector<NeuronFreqTable> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    NeuronFreqTable t;
    try {
      const auto rec = json::parse(line);
      t.concept_name = rec.at("concept_name").get<std::string>();
      t.n = rec.at("n").get<std::size_t>();
      t.freq = rec.at("freq").get<std::vector<double>>();
      t.sum_qc = rec.at("sum_qc").get<std::vector<std::uint32_t>>();
      t.sum_qd = rec.at("sum_qd").get<std::vector<std::uint32_t>>();
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidInput,
           "freq table line " + std::to_string(line_no) + ": " + e.what());
    }
    require(t.freq.size() == t.sum_qc.size() && t.freq.size() == t.sum_qd.size(),
            "freq table line " + std::to_string(line_no) + ": column lengths differ");
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace saelab::concepts
