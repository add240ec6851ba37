#include <algorithm>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli_util.hpp"
#include "saelab/checkpoint.hpp"
#include "saelab/concept_eval.hpp"
#include "saelab/dataset.hpp"
#include "saelab/error.hpp"
#include "saelab/neuron_filter.hpp"
#include "saelab/probes.hpp"

namespace saelab::cli {

using nlohmann::json;

namespace {

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string pairs;
  bool pool_level0 = false;
  std::string thresholds = "0,0.1,0.2,0.3,0.5";
  double epsilon = 0.0;
  std::string freq_out;
  std::string cdf_out;
  std::string probe_k;
  std::uint64_t seed = 0;
};

// Per-query max of every latent, rows = 2n (concept queries then twins).
Matrix<float> query_features(const Matrix<float>& latents, const concepts::ConceptPairSet& set,
                             std::vector<bool>* labels) {
  Matrix<float> out(0, latents.cols());
  auto add = [&](concepts::RowRange rows, bool label) {
    std::vector<float> f(latents.cols(), 0.0f);
    for (std::size_t r = rows.begin; r < rows.end; ++r) {
      for (std::size_t j = 0; j < latents.cols(); ++j) f[j] = std::max(f[j], latents(r, j));
    }
    out.append_row(f);
    labels->push_back(label);
  };
  for (const auto& p : set.pairs) add(p.concept_rows, true);
  for (const auto& p : set.pairs) add(p.deconcept_rows, false);
  return out;
}

void run_eval_concepts(const EvalArgs& a) {
  const auto ds = ingest::load_dump(a.data);
  const auto ckpt = load_checkpoint(a.ckpt);
  require(ckpt.params.input_dim() == ds.dim(), "checkpoint and dump dimensions differ");
  auto sets = concepts::resolve_pairsets(concepts::load_pair_records(a.pairs), ds);
  if (a.pool_level0) sets = concepts::pool_by_level0(sets);
  const auto latents = encode_rows(ds.data, ckpt.params, ckpt.config.topk);
  const auto thresholds = parse_real_list(a.thresholds);
  std::vector<std::size_t> ks;
  for (int k : parse_int_list(a.probe_k)) {
    require(k >= 1, "probe k must be positive");
    if (static_cast<std::size_t>(k) <= latents.cols()) ks.push_back(static_cast<std::size_t>(k));
  }

  std::vector<concepts::NeuronFreqTable> tables;
  std::ostringstream cdf_csv;
  cdf_csv << "concept,x,cdf\n";
  for (const auto& set : sets) {
    std::vector<concepts::PairFlags> flags;
    for (const auto& p : set.pairs) {
      flags.push_back({concepts::flags_from_latents(latents, p.concept_rows, a.epsilon),
                       concepts::flags_from_latents(latents, p.deconcept_rows, a.epsilon)});
    }
    auto table = concepts::delta_freq_from_flags(set.concept_name, flags);
    json l0 = json::object();
    for (double t : thresholds) {
      std::ostringstream key;
      key << t;
      l0[key.str()] = concepts::l0_at_threshold(table, t);
    }
    json line{{"concept", set.concept_name},
              {"n", table.n},
              {"icdf", concepts::icdf(table)},
              {"l0", l0}};
    if (!ks.empty()) {
      std::vector<bool> labels;
      const auto features = query_features(latents, set, &labels);
      concepts::ProbeOptions options;
      options.seed = a.seed;
      json probe = json::array();
      for (const auto& row : concepts::ksparse_sweep(features, labels, ks, options)) {
        probe.push_back({{"k", row.k}, {"accuracy", row.accuracy}});
      }
      const auto one_d = concepts::one_d_probe(features, labels, options);
      line["probe"] = probe;
      line["one_d_probe"] = {{"min_loss", one_d.min_loss}, {"best_feature", one_d.best_feature}};
    }
    std::cout << line.dump() << '\n';
    for (const auto& pt : concepts::empirical_cdf(table)) {
      cdf_csv << set.concept_name << ',' << pt.x << ',' << pt.cdf << '\n';
    }
    tables.push_back(std::move(table));
  }
  if (!a.freq_out.empty()) write_text(a.freq_out, concepts::serialize_freq_tables(tables));
  if (!a.cdf_out.empty()) write_text(a.cdf_out, cdf_csv.str());
}

struct FilterArgs {
  std::string freq;
  int layer = 0;
  double precision = 0.75;
  double recall = 0.2;
  std::string out = "-";
};

void run_filter(const FilterArgs& a) {
  const auto tables = concepts::parse_freq_tables(read_text(a.freq));
  const auto candidates =
      filter::filter_neurons(tables, filter::FilterThresholds{a.precision, a.recall});
  write_text(a.out, filter::serialize_candidates(candidates, a.layer));
  std::cerr << candidates.size() << " candidates\n";
}

}  // namespace

void register_concepts(CLI::App& app) {
  auto e = std::make_shared<EvalArgs>();
  auto* eval_cmd = app.add_subcommand("eval-concepts",
                                      "Delta frequencies, L0 at thresholds and I_CDF per concept");
  eval_cmd->add_option("--data", e->data)->required();
  eval_cmd->add_option("--ckpt", e->ckpt)->required();
  eval_cmd->add_option("--pairs", e->pairs, "Pair records (JSONL)")->required();
  eval_cmd->add_flag("--pool-level0", e->pool_level0, "Pool subclasses into level-0 concepts");
  eval_cmd->add_option("--thresholds", e->thresholds, "Comma-separated t values for L0");
  eval_cmd->add_option("--epsilon", e->epsilon, "Activation threshold for firing");
  eval_cmd->add_option("--freq-out", e->freq_out, "Write frequency tables (JSONL)");
  eval_cmd->add_option("--cdf-out", e->cdf_out, "Write CDF points (CSV)");
  eval_cmd->add_option("--probe-k", e->probe_k, "Comma-separated k for sparse probes, e.g. 1,3,5,20");
  eval_cmd->add_option("--seed", e->seed, "Probe split seed");
  eval_cmd->callback([e] { run_eval_concepts(*e); });

  auto f = std::make_shared<FilterArgs>();
  auto* filter_cmd = app.add_subcommand("filter", "Select safety-neuron candidates");
  filter_cmd->add_option("--freq", f->freq, "Frequency tables from eval-concepts")->required();
  filter_cmd->add_option("--layer", f->layer, "Host-model layer of the SAE");
  filter_cmd->add_option("--precision", f->precision);
  filter_cmd->add_option("--recall", f->recall);
  filter_cmd->add_option("--out", f->out, "Candidate file (JSONL), - for stdout");
  filter_cmd->callback([f] { run_filter(*f); });
}

}  // namespace saelab::cli
