#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>

#include <nlohmann/json.hpp>

#include "cli_util.hpp"
#include "saelab/backend.hpp"
#include "saelab/checkpoint.hpp"
#include "saelab/concept_eval.hpp"
#include "saelab/dataset.hpp"
#include "saelab/error.hpp"
#include "saelab/explain_io.hpp"
#include "saelab/explain_sim.hpp"
#include "saelab/mock_backend.hpp"
#include "saelab/mock_corpus.hpp"
#include "saelab/neuron_db.hpp"
#include "saelab/neuron_filter.hpp"
#include "saelab/parallel.hpp"

namespace saelab::cli {

using nlohmann::json;
using namespace saelab::explain;

namespace {

std::vector<double> latent_column(const Matrix<float>& latents, std::size_t j) {
  std::vector<double> out(latents.rows());
  for (std::size_t r = 0; r < latents.rows(); ++r) out[r] = latents(r, j);
  return out;
}

struct ExplainArgs {
  std::string candidates;
  std::string data;
  std::string ckpt;
  std::string backend;
  std::string freq;
  std::size_t per_bin = 20;
  std::uint64_t seed = 0;
  std::string out = "-";
};

void run_explain(const ExplainArgs& a) {
  int layer = 0;
  const auto candidates = filter::parse_candidates(read_text(a.candidates), &layer);
  const auto ds = ingest::load_dump(a.data);
  const auto ckpt = load_checkpoint(a.ckpt);
  require(ckpt.params.input_dim() == ds.dim(), "checkpoint and dump dimensions differ");
  const auto config = load_backend_config(a.backend);
  auto backend = make_backend(config);

  std::map<std::uint32_t, std::vector<std::string>> concepts_of;
  for (const auto& c : candidates) concepts_of[c.neuron].push_back(c.concept_name);
  std::map<std::string, const concepts::NeuronFreqTable*> freq_of;
  std::vector<concepts::NeuronFreqTable> tables;
  if (!a.freq.empty()) tables = concepts::parse_freq_tables(read_text(a.freq));
  for (const auto& t : tables) freq_of[t.concept_name] = &t;

  const auto latents = encode_rows(ds.data, ckpt.params, ckpt.config.topk);
  std::vector<std::uint32_t> neurons;
  for (const auto& [n, cs] : concepts_of) {
    require(n < latents.cols(), "candidate neuron " + std::to_string(n) + " outside the SAE");
    neurons.push_back(n);
  }
  std::vector<std::optional<ExplanationRecord>> results(neurons.size());
  std::mutex log_mu;
  parallel_for(neurons.size(), config.max_in_flight, [&](std::size_t i) {
    const auto j = neurons[i];
    const auto column = latent_column(latents, j);
    std::vector<ActivationExample> examples;
    try {
      examples = build_examples(ds, column);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDeadNeuron) throw;
      std::lock_guard lock(log_mu);
      std::cerr << "neuron " << j << ": never fires, skipped\n";
      return;
    }
    const auto samples = sample_per_bin(examples, a.per_bin, a.seed);
    const auto result = explain_neuron(NeuronId{layer, j}, samples, *backend, config.retry);
    ExplanationRecord rec;
    rec.explanation = result.explanation;
    rec.max_activation = *std::max_element(column.begin(), column.end());
    rec.safety_tags = concepts_of.at(j);
    for (const auto& c : rec.safety_tags) {
      if (auto it = freq_of.find(c); it != freq_of.end()) {
        rec.freq_by_concept[c] = it->second->freq.at(j);
      }
    }
    results[i] = std::move(rec);
  });
  std::string out;
  for (const auto& r : results) {
    if (r) out += to_json(*r).dump() + "\n";
  }
  write_text(a.out, out);
}

struct SimulateArgs {
  std::string explanations;
  std::string data;
  std::string ckpt;
  std::string mock_corpus;
  bool oracle_mock = false;
  std::string backend;
  std::string method = "token";
  std::size_t segments = 4;
  bool per_example_mean = false;
  std::size_t per_bin = 20;
  std::uint64_t seed = 0;
  std::string out = "-";
};

struct SimJob {
  NeuronId neuron;
  std::string explanation;
  std::vector<ActivationExample> examples;
  std::optional<MockRules> oracle;
};

void run_simulate(const SimulateArgs& a) {
  std::vector<SimJob> jobs;
  if (!a.mock_corpus.empty()) {
    const auto corpus = load_mock_corpus(a.mock_corpus);
    for (const auto& n : corpus.neurons) {
      jobs.push_back(SimJob{n.id, n.explanation, corpus.examples(n),
                            a.oracle_mock ? std::optional(corpus.rules(n)) : std::nullopt});
    }
  } else {
    require(!a.explanations.empty() && !a.data.empty() && !a.ckpt.empty(),
            "simulate needs --explanations, --data and --ckpt, or --mock-corpus");
    const auto ds = ingest::load_dump(a.data);
    const auto ckpt = load_checkpoint(a.ckpt);
    require(ckpt.params.input_dim() == ds.dim(), "checkpoint and dump dimensions differ");
    const auto latents = encode_rows(ds.data, ckpt.params, ckpt.config.topk);
    for (const auto& rec : parse_explanations(read_text(a.explanations))) {
      const auto j = rec.explanation.neuron.index;
      require(j < latents.cols(), "explained neuron outside the SAE");
      const auto examples = build_examples(ds, latent_column(latents, j));
      jobs.push_back(SimJob{rec.explanation.neuron, rec.explanation.text,
                            sample_per_bin(examples, a.per_bin, a.seed), std::nullopt});
    }
  }
  require(a.oracle_mock || !a.backend.empty(), "--backend is required unless --oracle-mock is set");
  BackendConfig config;
  std::unique_ptr<Backend> shared;
  if (!a.backend.empty()) {
    config = load_backend_config(a.backend);
    shared = make_backend(config);
  }
  SimOptions options;
  options.method = parse_method(a.method);
  options.n_segments = a.segments;
  options.aggregation = a.per_example_mean ? Aggregation::kPerExampleMean : Aggregation::kPooled;
  options.retry = config.retry;
  options.max_in_flight = config.max_in_flight;

  std::vector<SimulationRun> runs;
  std::string out;
  for (const auto& job : jobs) {
    std::unique_ptr<Backend> own;
    if (job.oracle) own = std::make_unique<MockBackend>(*job.oracle);
    Backend& backend = own ? *own : *shared;
    auto run = simulate_neuron(job.neuron, job.explanation, job.examples, backend, options);
    out += to_json(run).dump() + "\n";
    std::cerr << to_string(run.neuron) << ' ' << method_name(run.method)
              << " corr=" << run.corr_score << (run.corr_defined ? "" : " (undefined)")
              << " tau=" << run.kendall_tau << " generated_tokens=" << run.generated_tokens
              << '\n';
    runs.push_back(std::move(run));
  }
  write_text(a.out, out);
  if (!runs.empty()) std::cerr << to_json(cost_report(runs)).dump() << '\n';
}

struct ScoreArgs {
  std::vector<std::string> runs;
  std::string explanations;
  std::string backend;
  std::string out = "-";
  std::string records_out;
  std::string cost_out;
};

void run_score(const ScoreArgs& a) {
  std::vector<SimulationRun> runs;
  for (const auto& path : a.runs) {
    for (auto& r : parse_runs(read_text(path))) runs.push_back(std::move(r));
  }
  std::map<NeuronId, ExplanationRecord> explanations;
  if (!a.explanations.empty()) {
    for (auto& r : parse_explanations(read_text(a.explanations))) {
      explanations[r.explanation.neuron] = std::move(r);
    }
  }
  std::map<NeuronId, json> lines;
  std::map<NeuronId, const SimulationRun*> primary;
  for (const auto& run : runs) {
    auto& line = lines[run.neuron];
    line["layer"] = run.neuron.layer;
    line["index"] = run.neuron.index;
    line["runs"][method_name(run.method)] = to_json(run, false);
    auto& p = primary[run.neuron];
    if (!p || run.method == SimMethod::kTokenLevel) p = &run;
  }
  std::map<NeuronId, int> sp;
  if (!a.backend.empty()) {
    require(!explanations.empty(), "SpScore needs --explanations");
    const auto config = load_backend_config(a.backend);
    auto backend = make_backend(config);
    for (const auto& [id, rec] : explanations) {
      const auto result = sp_score(id, rec.explanation.text, *backend, config.retry);
      if (result.clamped) std::cerr << to_string(id) << ": SpScore clamped into 0..10\n";
      sp[id] = result.score;
      lines[id]["layer"] = id.layer;
      lines[id]["index"] = id.index;
    }
  }
  std::string out;
  for (auto& [id, line] : lines) {
    auto it = sp.find(id);
    line["sp_score"] = it == sp.end() ? json(nullptr) : json(it->second);
    out += line.dump() + "\n";
  }
  write_text(a.out, out);
  if (!runs.empty()) {
    const auto cost = to_json(cost_report(runs)).dump(2) + "\n";
    if (a.cost_out.empty()) {
      std::cerr << cost;
    } else {
      write_text(a.cost_out, cost);
    }
  }
  if (!a.records_out.empty()) {
    require(!explanations.empty(), "--records-out needs --explanations");
    std::vector<db::NeuronRecord> records;
    for (const auto& [id, rec] : explanations) {
      db::NeuronRecord r;
      r.layer = id.layer;
      r.index = id.index;
      r.explanation = rec.explanation.text;
      if (auto p = primary.find(id); p != primary.end()) r.corr_score = p->second->corr_score;
      if (auto s = sp.find(id); s != sp.end()) r.sp_score = s->second;
      r.safety_tags = rec.safety_tags;
      r.freq_by_concept = rec.freq_by_concept;
      r.max_activation = rec.max_activation;
      r.created_at = rec.explanation.created_at;
      records.push_back(std::move(r));
    }
    write_text(a.records_out, db::export_jsonl(records));
  }
}

}  // namespace

void register_explain(CLI::App& app) {
  auto e = std::make_shared<ExplainArgs>();
  auto* explain_cmd = app.add_subcommand("explain", "Generate explanations for candidate neurons");
  explain_cmd->add_option("--candidates", e->candidates, "Output of filter")->required();
  explain_cmd->add_option("--data", e->data, "Activation dump")->required();
  explain_cmd->add_option("--ckpt", e->ckpt, "SAE checkpoint")->required();
  explain_cmd->add_option("--backend", e->backend, "Backend config (JSON)")->required();
  explain_cmd->add_option("--freq", e->freq, "Frequency tables, to attach freq_by_concept");
  explain_cmd->add_option("--per-bin", e->per_bin, "Examples sampled per activation bin");
  explain_cmd->add_option("--seed", e->seed);
  explain_cmd->add_option("--out", e->out);
  explain_cmd->callback([e] { run_explain(*e); });

  auto s = std::make_shared<SimulateArgs>();
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate activations from explanations");
  sim_cmd->add_option("--explanations", s->explanations);
  sim_cmd->add_option("--data", s->data);
  sim_cmd->add_option("--ckpt", s->ckpt);
  sim_cmd->add_option("--mock-corpus", s->mock_corpus, "Use a mock corpus instead of a dump");
  sim_cmd->add_flag("--oracle-mock", s->oracle_mock,
                    "With --mock-corpus: answer with each neuron's own rules");
  sim_cmd->add_option("--backend", s->backend, "Backend config (JSON)");
  sim_cmd->add_option("--method", s->method)
      ->check(CLI::IsMember({"token", "segment", "all-at-once"}));
  sim_cmd->add_option("--segments", s->segments, "Segments per query; 0 means one per token");
  sim_cmd->add_flag("--per-example-mean", s->per_example_mean,
                    "Average per-example correlations instead of pooling");
  sim_cmd->add_option("--per-bin", s->per_bin);
  sim_cmd->add_option("--seed", s->seed);
  sim_cmd->add_option("--out", s->out);
  sim_cmd->callback([s] { run_simulate(*s); });

  auto c = std::make_shared<ScoreArgs>();
  auto* score_cmd = app.add_subcommand("score", "Per-neuron CorrScore, tau and SpScore records");
  score_cmd->add_option("--runs", c->runs, "Simulation runs (JSONL); repeatable")->required();
  score_cmd->add_option("--explanations", c->explanations);
  score_cmd->add_option("--backend", c->backend, "Backend for SpScore");
  score_cmd->add_option("--out", c->out);
  score_cmd->add_option("--records-out", c->records_out, "Neuron records for db import");
  score_cmd->add_option("--cost-out", c->cost_out, "Cost report (JSON)");
  score_cmd->callback([c] { run_score(*c); });

  auto g = std::make_shared<std::tuple<std::string, std::uint64_t, std::size_t>>("-", 0, 50);
  auto* gen_cmd = app.add_subcommand("gen-mock-corpus", "Write the keyword-driven mock corpus");
  gen_cmd->add_option("--out", std::get<0>(*g));
  gen_cmd->add_option("--seed", std::get<1>(*g));
  gen_cmd->add_option("--queries", std::get<2>(*g));
  gen_cmd->callback([g] {
    write_text(std::get<0>(*g),
               serialize_mock_corpus(gen_mock_corpus(std::get<1>(*g), std::get<2>(*g))));
  });
}

}  // namespace saelab::cli
