#include "saelab/service.hpp"

#include <charconv>
#include <cstdio>
#include <deque>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"
#include "saelab/trace_analysis.hpp"

namespace saelab::db {

using nlohmann::json;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kQuery:
    case ErrorCode::kInvalidInput:
    case ErrorCode::kValidation:
    case ErrorCode::kMetadataMismatch:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  send_json(res, status, json{{"error", {{"code", code}, {"message", message}}}});
}

template <typename T>
T parse_integer(const std::string& name, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::kQuery, name + " must be an integer");
  return value;
}

double parse_real(const std::string& name, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) fail(ErrorCode::kQuery, name + " must be a number");
  return value;
}

void reject_unknown_params(const httplib::Request& req, const std::set<std::string>& known) {
  for (const auto& [key, value] : req.params) {
    if (!known.count(key)) fail(ErrorCode::kQuery, "unknown query parameter '" + key + "'");
  }
}

std::string trace_id_for(const std::string& body) {
  const auto crc = crc32(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tr-%08x-%zx", crc, body.size());
  return buf;
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  NeuronDb db;
  CheckpointSet checkpoints;
  httplib::Server server;

  std::shared_mutex traces_mu;
  std::unordered_map<std::string, ingest::TraceFile> traces;
  std::deque<std::string> trace_order;

  explicit Impl(ServiceConfig c) : config(std::move(c)), db(config.db_path) {
    if (!config.ckpt_dir.empty()) checkpoints = load_checkpoint_dir(config.ckpt_dir);
  }

  std::string add_trace(ingest::TraceFile trace, const std::string& id) {
    trace.validate();
    std::unique_lock lock(traces_mu);
    if (traces.count(id) == 0) {
      trace_order.push_back(id);
      while (trace_order.size() > config.max_traces) {
        traces.erase(trace_order.front());
        trace_order.pop_front();
      }
    }
    traces[id] = std::move(trace);
    return id;
  }

  ingest::TraceFile trace(const std::string& id) {
    std::shared_lock lock(traces_mu);
    const auto it = traces.find(id);
    if (it == traces.end()) fail(ErrorCode::kNotFound, "unknown trace id '" + id + "'");
    return it->second;
  }

  std::vector<int> trace_layers(const ingest::TraceFile& t) const {
    std::vector<int> out;
    for (const auto& [layer, m] : t.layers) out.push_back(layer);
    return out;
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler guarded(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      try {
        inner(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, error_code_name(ErrorCode::kInvalidInput), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.set_payload_max_length(config.max_body_bytes);

    server.Get("/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::vector<int> layers;
      for (const auto& [layer, ck] : checkpoints.by_layer) layers.push_back(layer);
      std::size_t n_traces = 0;
      {
        std::shared_lock lock(traces_mu);
        n_traces = traces.size();
      }
      send_json(res, 200,
                json{{"status", "ok"},
                     {"neurons", db.size()},
                     {"checkpoint_layers", layers},
                     {"traces", n_traces},
                     {"warnings", checkpoints.warnings}});
    }));

    server.Get("/neurons", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reject_unknown_params(req, {"tag", "layer", "min_corr", "q", "page", "page_size"});
      NeuronQuery q;
      if (req.has_param("tag")) q.tag = req.get_param_value("tag");
      if (req.has_param("layer")) q.layer = parse_integer<int>("layer", req.get_param_value("layer"));
      if (req.has_param("min_corr")) {
        q.min_corr = parse_real("min_corr", req.get_param_value("min_corr"));
      }
      if (req.has_param("q")) q.text = req.get_param_value("q");
      if (req.has_param("page")) {
        q.page = parse_integer<std::size_t>("page", req.get_param_value("page"));
      }
      if (req.has_param("page_size")) {
        q.page_size = parse_integer<std::size_t>("page_size", req.get_param_value("page_size"));
      }
      const auto page = db.query(q);
      json records = json::array();
      for (const auto& r : page.records) records.push_back(to_json(r));
      send_json(res, 200,
                json{{"total", page.total},
                     {"page", page.page},
                     {"page_size", page.page_size},
                     {"records", records}});
    }));

    server.Get(R"(/neurons/(-?\d+)/(\d+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const int layer = parse_integer<int>("layer", req.matches[1].str());
                 const auto index = parse_integer<std::uint32_t>("index", req.matches[2].str());
                 const auto rec = db.get(layer, index);
                 if (!rec) {
                   fail(ErrorCode::kNotFound, "no neuron " + std::to_string(layer) + ":" +
                                                  std::to_string(index));
                 }
                 send_json(res, 200, to_json(*rec));
               }));

    server.Post("/neurons", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto records = parse_jsonl(req.body);
      const auto total = db.upsert(records);
      send_json(res, 200, json{{"upserted", records.size()}, {"total", total}});
    }));

    server.Post("/traces", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto trace = ingest::parse_trace(req.body);
      const auto layers = trace_layers(trace);
      const std::size_t n_tokens = trace.tokens.size();
      const std::string query_id = trace.query_id;
      const auto id = add_trace(std::move(trace), trace_id_for(req.body));
      std::vector<std::string> warnings;
      for (int layer : layers) {
        if (!checkpoints.by_layer.count(layer)) {
          warnings.push_back("layer " + std::to_string(layer) + ": no checkpoint");
        }
      }
      send_json(res, 201,
                json{{"trace_id", id},
                     {"query_id", query_id},
                     {"tokens", n_tokens},
                     {"layers", layers},
                     {"warnings", warnings}});
    }));

    server.Post("/analyze", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      if (!body.is_object() || !body.contains("trace_id") || !body["trace_id"].is_string()) {
        fail(ErrorCode::kInvalidInput, "body must be an object with a string trace_id");
      }
      std::size_t top_m = config.default_top_m;
      if (body.contains("top_m")) {
        if (!body["top_m"].is_number_unsigned()) {
          fail(ErrorCode::kInvalidInput, "top_m must be a positive integer");
        }
        top_m = body["top_m"].get<std::size_t>();
      }
      const auto id = body["trace_id"].get<std::string>();
      auto out = to_json(analyze_trace(trace(id), checkpoints, db, top_m));
      out["trace_id"] = id;
      send_json(res, 200, out);
    }));

    server.Get(R"(/chain/([A-Za-z0-9_.-]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 reject_unknown_params(req, {"top_m", "top_n", "begin", "end"});
                 ChainOptions options;
                 options.top_m = config.default_top_m;
                 options.top_n = config.default_top_n;
                 auto num = [&](const char* name) {
                   return parse_integer<std::size_t>(name, req.get_param_value(name));
                 };
                 if (req.has_param("top_m")) options.top_m = num("top_m");
                 if (req.has_param("top_n")) options.top_n = num("top_n");
                 if (req.has_param("begin")) options.region_begin = num("begin");
                 if (req.has_param("end")) options.region_end = num("end");
                 const auto id = req.matches[1].str();
                 auto out = to_json(activation_chain(trace(id), checkpoints, db, options));
                 out["trace_id"] = id;
                 send_json(res, 200, out);
               }));

    if (!config.static_dir.empty()) {
      require(server.set_mount_point("/", config.static_dir.string()),
              "static directory " + config.static_dir.string() + " does not exist");
    }
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  int port = impl_->config.port;
  if (port == 0) {
    port = s.bind_to_any_port(impl_->config.host);
  } else if (!s.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) {
    fail(ErrorCode::kIo, "cannot bind " + impl_->config.host + ":" +
                             std::to_string(impl_->config.port));
  }
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

NeuronDb& Service::db() { return impl_->db; }

std::string Service::add_trace(ingest::TraceFile trace) {
  const auto text = ingest::serialize_trace(trace);
  return impl_->add_trace(std::move(trace), trace_id_for(text));
}

}  // namespace saelab::db
