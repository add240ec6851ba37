#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "saelab/dataset.hpp"
#include "saelab/neuron_db.hpp"

namespace saelab::db {

struct ServiceConfig {
  std::filesystem::path db_path;     // empty: in-memory database
  std::filesystem::path ckpt_dir;    // layer_<L>.ckpt files
  std::filesystem::path static_dir;  // served under / when set
  std::string host = "127.0.0.1";
  int port = 8080;                   // 0 picks a free port
  std::size_t max_traces = 256;      // oldest uploads are evicted first
  std::size_t max_body_bytes = 64u << 20;
  std::size_t default_top_m = 10;
  std::size_t default_top_n = 5;
};

// HTTP API:
//   GET  /health
//   GET  /neurons?tag=&layer=&min_corr=&q=&page=&page_size=
//   GET  /neurons/{layer}/{index}
//   POST /neurons                 line-delimited NeuronRecords (upsert)
//   POST /traces                  line-delimited trace records
//   POST /analyze                 {"trace_id", "top_m"}
//   GET  /chain/{trace_id}?top_m=&top_n=&begin=&end=
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the listening socket and returns the port.
  int bind();
  // Serves until stop(); call bind() first.
  void run();
  void stop();

  NeuronDb& db();
  std::string add_trace(ingest::TraceFile trace);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace saelab::db
