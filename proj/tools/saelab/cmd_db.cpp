#include <csignal>
#include <iostream>
#include <memory>

#include "cli_util.hpp"
#include "saelab/error.hpp"
#include "saelab/neuron_db.hpp"
#include "saelab/service.hpp"

namespace saelab::cli {

namespace {

db::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

void run_serve(const db::ServiceConfig& config) {
  db::Service service(config);
  const int port = service.bind();
  std::cerr << "serving " << service.db().size() << " neurons on http://" << config.host << ':'
            << port << '\n';
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.run();
  g_service = nullptr;
}

}  // namespace

void register_db(CLI::App& app) {
  auto config = std::make_shared<db::ServiceConfig>();
  auto* serve = app.add_subcommand("serve", "Serve the neuron database and trace analysis over HTTP");
  serve->add_option("--db", config->db_path, "Neuron store file")->required();
  serve->add_option("--ckpt-dir", config->ckpt_dir, "Directory of layer_<L>.ckpt files");
  serve->add_option("--static-dir", config->static_dir, "Static assets served under /");
  serve->add_option("--host", config->host);
  serve->add_option("--port", config->port, "0 picks a free port");
  serve->add_option("--max-traces", config->max_traces);
  serve->callback([config] { run_serve(*config); });

  auto* db_cmd = app.add_subcommand("db", "Neuron database maintenance");
  db_cmd->require_subcommand(1);
  auto paths = std::make_shared<std::pair<std::string, std::string>>();
  auto* import_cmd = db_cmd->add_subcommand("import", "Upsert records from a JSONL file");
  import_cmd->add_option("file", paths->second, "Records (JSONL), - for stdin")->required();
  import_cmd->add_option("--db", paths->first, "Neuron store file")->required();
  import_cmd->callback([paths] {
    db::NeuronDb store(paths->first);
    const auto records = db::parse_jsonl(read_text(paths->second));
    const auto total = store.upsert(records);
    std::cerr << "upserted " << records.size() << " records; " << total << " in store\n";
  });
  auto* export_cmd = db_cmd->add_subcommand("export", "Write all records as JSONL");
  export_cmd->add_option("file", paths->second, "Output file, - for stdout")->required();
  export_cmd->add_option("--db", paths->first, "Neuron store file")->required();
  export_cmd->callback([paths] {
    db::NeuronDb store(paths->first);
    write_text(paths->second, db::export_jsonl(store.all()));
  });
}

}  // namespace saelab::cli
