#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli_util.hpp"
#include "saelab/error.hpp"
#include "saelab/toy_model.hpp"

namespace saelab::cli {

namespace {

struct ToyArgs {
  toy::ToyConfig config;
  int seeds = 3;
  std::uint64_t seed_base = 0;
  std::string out = "-";
  std::string gram_dir;
};

void write_gram(const std::filesystem::path& path, const Matrix<double>& gram) {
  std::ostringstream csv;
  csv.precision(6);
  for (std::size_t r = 0; r < gram.rows(); ++r) {
    for (std::size_t c = 0; c < gram.cols(); ++c) csv << (c ? "," : "") << gram(r, c);
    csv << '\n';
  }
  write_text(path.string(), csv.str());
}

void run_toy(const ToyArgs& a) {
  require(a.seeds >= 1, "--seeds must be at least 1");
  if (!a.gram_dir.empty()) std::filesystem::create_directories(a.gram_dir);
  std::ostringstream csv;
  csv.precision(10);
  csv << "seed,k,g,safety_only,interference_avg,interference_max,final_loss\n";
  int holds = 0;
  for (int s = 0; s < a.seeds; ++s) {
    auto config = a.config;
    config.seed = a.seed_base + static_cast<std::uint64_t>(s);
    toy::GramSink sink;
    if (!a.gram_dir.empty()) {
      sink = [&](std::size_t k, const toy::Interference& inter) {
        write_gram(std::filesystem::path(a.gram_dir) /
                       ("gram_seed" + std::to_string(config.seed) + "_k" + std::to_string(k) + ".csv"),
                   inter.gram);
      };
    }
    const auto result = toy::sweep(config, sink);
    for (const auto& row : result.rows) {
      csv << config.seed << ',' << row.k << ',' << row.g << ',' << row.safety_only << ','
          << row.interference_avg << ',' << row.interference_max << ',' << row.final_loss << '\n';
    }
    const bool ok = result.argmax_g_k < result.argmin_interference_k;
    holds += ok ? 1 : 0;
    std::cerr << nlohmann::json{{"seed", config.seed},
                                {"argmax_g_k", result.argmax_g_k},
                                {"argmin_interference_k", result.argmin_interference_k},
                                {"argmax_below_argmin", ok}}
                     .dump()
              << '\n';
  }
  write_text(a.out, csv.str());
  std::cerr << "argmax g(k) < argmin interference on " << holds << " of " << a.seeds
            << " seeds\n";
}

}  // namespace

void register_toy(CLI::App& app) {
  auto a = std::make_shared<ToyArgs>();
  auto* cmd = app.add_subcommand("toy", "Tied-SAE sparsity sweep on the safety-subspace toy data");
  cmd->add_option("--d", a->config.input_dim, "Input dimension");
  cmd->add_option("--l", a->config.latent_dim, "Latent width");
  cmd->add_option("--kmin", a->config.k_min);
  cmd->add_option("--kmax", a->config.k_max);
  cmd->add_option("--n", a->config.samples_per_set, "Samples per set");
  cmd->add_option("--coeff", a->config.safety_coeff, "Loss weight of safety rows");
  cmd->add_option("--epochs", a->config.epochs);
  cmd->add_option("--lr", a->config.learning_rate);
  cmd->add_option("--batch", a->config.batch_size);
  cmd->add_option("--seeds", a->seeds, "Number of seeds");
  cmd->add_option("--seed-base", a->seed_base, "First seed");
  cmd->add_option("--out", a->out, "Sweep CSV, - for stdout");
  cmd->add_option("--gram-dir", a->gram_dir, "Write per-k |cosine| matrices as CSV");
  cmd->callback([a] { run_toy(*a); });
}

}  // namespace saelab::cli
