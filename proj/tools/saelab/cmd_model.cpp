#include <filesystem>
#include <iostream>
#include <memory>

#include <nlohmann/json.hpp>

#include "cli_util.hpp"
#include "saelab/checkpoint.hpp"
#include "saelab/dataset.hpp"
#include "saelab/error.hpp"
#include "saelab/sae.hpp"
#include "saelab/synthetic.hpp"

namespace saelab::cli {

using nlohmann::json;

namespace {

struct TrainArgs {
  std::string data;
  std::string out;
  std::size_t k = 32;
  std::size_t latent = 0;
  double expansion = 8.0;
  int epochs = 10;
  double lr = 1e-2;
  std::size_t batch = 256;
  std::uint64_t seed = 0;
  bool tied = false;
  bool quiet = false;
};

void run_train(const TrainArgs& a) {
  const auto ds = ingest::load_dump(a.data);
  SaeConfig config = a.latent > 0 ? SaeConfig{} : SaeConfig::with_expansion(ds.dim(), a.expansion, a.k);
  config.input_dim = ds.dim();
  if (a.latent > 0) {
    config.latent_dim = a.latent;
    config.expansion_factor = static_cast<double>(a.latent) / static_cast<double>(ds.dim());
  }
  config.topk = a.k;
  config.epochs = a.epochs;
  config.learning_rate = a.lr;
  config.batch_size = a.batch;
  config.seed = a.seed;
  config.tied_weights = a.tied;
  TrainOptions options;
  if (!a.quiet) {
    options.on_epoch = [](const TrainStats& s, const SaeParams&) {
      std::cerr << json{{"epoch", s.epoch},
                        {"l2", s.l2_loss},
                        {"alive", s.alive_count},
                        {"grad_norm", s.grad_norm},
                        {"mean_decoder_norm", s.mean_decoder_norm}}
                       .dump()
                << '\n';
    };
  }
  const auto result = train(ds.data, config, options);
  save_checkpoint(result.params, config, a.out);
  const auto metrics = eval_reconstruction(ds.data, result.params, config.topk);
  std::cout << json{{"checkpoint", a.out},
                    {"D", config.input_dim},
                    {"L", config.latent_dim},
                    {"k", config.topk},
                    {"l2", metrics.l2},
                    {"r_alive", metrics.r_alive}}
                   .dump()
            << '\n';
}

void run_eval(const std::string& data, const std::string& ckpt_path) {
  const auto ds = ingest::load_dump(data);
  const auto ckpt = load_checkpoint(ckpt_path);
  require(ckpt.params.input_dim() == ds.dim(), "checkpoint and dump dimensions differ");
  const auto m = eval_reconstruction(ds.data, ckpt.params, ckpt.config.topk);
  json out{{"rows", ds.rows()},
           {"l2", m.l2},
           {"r_alive", m.r_alive},
           {"alive_count", m.alive_count},
           {"latent_dim", ckpt.params.latent_dim()},
           {"k", ckpt.config.topk}};
  const auto [orig, recon] = ingest::ntp_losses(ds);
  if (!orig.empty()) {
    out["delta_ntp"] = delta_ntp(orig, recon);
    out["delta_ntp_rows"] = orig.size();
  } else {
    out["delta_ntp"] = nullptr;
  }
  std::cout << out.dump(2) << '\n';
}

void run_inspect(const std::string& data) {
  const auto ds = ingest::load_dump(data);
  json mix = json::array();
  for (const auto& share : ingest::mix_report(ds)) {
    mix.push_back({{"tag", share.tag}, {"count", share.count}, {"fraction", share.fraction}});
  }
  std::cout << json{{"rows", ds.rows()},
                    {"dim", ds.dim()},
                    {"location", ds.location},
                    {"queries", ingest::query_spans(ds).size()},
                    {"mix", mix}}
                   .dump(2)
            << '\n';
}

struct SynthArgs {
  std::string out_dir;
  synth::SyntheticConfig config;
  std::string layers = "8,12";
};

void run_gen_synthetic(const SynthArgs& a) {
  const auto corpus = synth::gen_synthetic(a.config);
  std::filesystem::create_directories(a.out_dir);
  const auto dir = std::filesystem::path(a.out_dir);
  ingest::save_dump(corpus.dataset, (dir / "corpus.bin").string());
  write_text((dir / "pairs.jsonl").string(), concepts::serialize_pair_records(corpus.pairs));
  const auto trace = synth::trace_from_query(corpus.dataset, corpus.pairs.front().concept_query_id,
                                             parse_int_list(a.layers));
  ingest::save_trace(trace, (dir / "trace.jsonl").string());
  std::cout << json{{"dump", (dir / "corpus.bin").string()},
                    {"pairs", (dir / "pairs.jsonl").string()},
                    {"trace", (dir / "trace.jsonl").string()},
                    {"rows", corpus.dataset.rows()},
                    {"pair_count", corpus.pairs.size()}}
                   .dump()
            << '\n';
}

}  // namespace

void register_model(CLI::App& app) {
  auto train_args = std::make_shared<TrainArgs>();
  auto* train_cmd = app.add_subcommand("train", "Train a TopK SAE on an activation dump");
  train_cmd->add_option("--data", train_args->data, "Activation dump")->required();
  train_cmd->add_option("--out", train_args->out, "Checkpoint to write")->required();
  train_cmd->add_option("--k", train_args->k, "Active latents per token");
  train_cmd->add_option("--latent", train_args->latent, "Latent width L (overrides --expansion)");
  train_cmd->add_option("--expansion", train_args->expansion, "L / D");
  train_cmd->add_option("--epochs", train_args->epochs);
  train_cmd->add_option("--lr", train_args->lr);
  train_cmd->add_option("--batch", train_args->batch);
  train_cmd->add_option("--seed", train_args->seed);
  train_cmd->add_flag("--tied", train_args->tied, "Tie decoder to encoder transpose");
  train_cmd->add_flag("--quiet", train_args->quiet, "No per-epoch log on stderr");
  train_cmd->callback([train_args] { run_train(*train_args); });

  auto eval_data = std::make_shared<std::pair<std::string, std::string>>();
  auto* eval_cmd = app.add_subcommand("eval-sae", "Reconstruction metrics of a checkpoint");
  eval_cmd->add_option("--data", eval_data->first)->required();
  eval_cmd->add_option("--ckpt", eval_data->second)->required();
  eval_cmd->callback([eval_data] { run_eval(eval_data->first, eval_data->second); });

  auto inspect_data = std::make_shared<std::string>();
  auto* inspect_cmd = app.add_subcommand("inspect-dump", "Summarize an activation dump");
  inspect_cmd->add_option("--data", *inspect_data)->required();
  inspect_cmd->callback([inspect_data] { run_inspect(*inspect_data); });

  auto synth_args = std::make_shared<SynthArgs>();
  auto* synth_cmd = app.add_subcommand("gen-synthetic",
                                       "Write a synthetic dump, pair file and trace for demos");
  synth_cmd->add_option("--out-dir", synth_args->out_dir)->required();
  synth_cmd->add_option("--seed", synth_args->config.seed);
  synth_cmd->add_option("--dim", synth_args->config.dim);
  synth_cmd->add_option("--pairs-per-concept", synth_args->config.pairs_per_concept);
  synth_cmd->add_option("--pile-queries", synth_args->config.pile_queries);
  synth_cmd->add_option("--trace-layers", synth_args->layers, "Comma-separated layers");
  synth_cmd->callback([synth_args] { run_gen_synthetic(*synth_args); });
}

}  // namespace saelab::cli
