#include "saelab/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"

namespace saelab::ingest {

using nlohmann::json;

void ActivationDataset::validate() const {
  require(data.cols() > 0 || data.rows() == 0, "dataset dimension must be positive");
  if (meta.size() != data.rows()) {
    fail(ErrorCode::kMetadataMismatch,
         "metadata has " + std::to_string(meta.size()) + " entries for " +
             std::to_string(data.rows()) + " rows");
  }
  for (const auto& m : meta) {
    require(m.token_index >= 0, "token_index must be nonnegative");
  }
}

std::vector<QuerySpan> query_spans(const ActivationDataset& dataset) {
  std::vector<QuerySpan> spans;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < dataset.meta.size(); ++r) {
    const auto& id = dataset.meta[r].query_id;
    if (!spans.empty() && spans.back().query_id == id) {
      spans.back().end = r + 1;
      continue;
    }
    if (!seen.insert(id).second) {
      fail(ErrorCode::kInvalidInput, "rows of query '" + id + "' are not contiguous");
    }
    spans.push_back({id, r, r + 1});
  }
  return spans;
}

std::map<std::string, QuerySpan> query_index(const ActivationDataset& dataset) {
  std::map<std::string, QuerySpan> out;
  for (auto& s : query_spans(dataset)) out.emplace(s.query_id, s);
  return out;
}

std::vector<std::uint8_t> serialize_dump(const Matrix<float>& data) {
  ByteWriter w;
  w.bytes(std::string_view(kDumpMagic, 8));
  w.u32(kDumpVersion);
  w.u32(static_cast<std::uint32_t>(data.cols()));
  w.u64(data.rows());
  const std::size_t blob_start = w.size();
  w.f32(data.flat());
  w.u32(crc32(w.tail(blob_start)));
  return w.buffer();
}

Matrix<float> parse_dump(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kDumpFormat);
  if (r.bytes(8, "magic") != std::string_view(kDumpMagic, 8)) {
    throw FormatError(ErrorCode::kDumpFormat, 0, "bad dump magic");
  }
  const auto version = r.u32("version");
  if (version != kDumpVersion) {
    throw FormatError(ErrorCode::kDumpFormat, 8,
                      "unsupported dump version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32("dim");
  const std::uint64_t rows = r.u64("row count");
  if (dim == 0) throw FormatError(ErrorCode::kDumpFormat, 12, "dump dimension is zero");
  const std::uint64_t blob_bytes = rows * dim * sizeof(float);
  if (rows != 0 && blob_bytes / rows / sizeof(float) != dim) r.error("dump size overflows");
  if (r.remaining() != blob_bytes + sizeof(std::uint32_t)) {
    r.error("dump header declares " + std::to_string(rows) + " x " + std::to_string(dim) +
            " floats but " + std::to_string(r.remaining()) + " bytes follow");
  }
  Matrix<float> data(rows, dim);
  const std::size_t blob_start = r.offset();
  r.f32(data.flat(), "blob");
  const std::size_t blob_end = r.offset();
  if (r.u32("checksum") != crc32(r.span(blob_start, blob_end))) {
    throw FormatError(ErrorCode::kDumpFormat, blob_end, "dump CRC mismatch");
  }
  return data;
}

std::string sidecar_path(const std::string& dump_path) { return dump_path + ".meta.jsonl"; }

std::string serialize_sidecar(const ActivationDataset& dataset) {
  std::string out;
  json header = {{"format", "saelab-sidecar"},
                 {"version", 1},
                 {"rows", dataset.meta.size()},
                 {"location", dataset.location}};
  out += header.dump();
  out += '\n';
  for (const auto& m : dataset.meta) {
    json rec = {{"query_id", m.query_id},
                {"token_index", m.token_index},
                {"token", m.token_text},
                {"tags", m.tags}};
    if (m.ntp_loss_original) rec["ntp_loss_original"] = *m.ntp_loss_original;
    if (m.ntp_loss_reconstructed) rec["ntp_loss_reconstructed"] = *m.ntp_loss_reconstructed;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

json parse_json_line(std::string_view line, std::size_t lineno, ErrorCode code) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    fail(code, "line " + std::to_string(lineno) + ": " + e.what());
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void parse_sidecar(std::string_view text, std::size_t expected_rows,
                   ActivationDataset& into) {
  const auto lines = split_lines(text);
  if (lines.empty()) fail(ErrorCode::kMetadataMismatch, "sidecar is empty");
  const json header = parse_json_line(lines[0], 1, ErrorCode::kDumpFormat);
  if (!header.is_object() || header.value("format", "") != "saelab-sidecar") {
    fail(ErrorCode::kDumpFormat, "sidecar header is missing or malformed");
  }
  into.location = header.value("location", "");
  const std::size_t records = lines.size() - 1;
  if (records != expected_rows ||
      header.value("rows", static_cast<std::size_t>(records)) != records) {
    fail(ErrorCode::kMetadataMismatch,
         "sidecar has " + std::to_string(records) + " records for " +
             std::to_string(expected_rows) + " rows");
  }
  into.meta.clear();
  into.meta.reserve(records);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const json rec = parse_json_line(lines[i], i + 1, ErrorCode::kDumpFormat);
    try {
      RowMeta m;
      m.query_id = rec.at("query_id").get<std::string>();
      m.token_index = rec.at("token_index").get<std::int64_t>();
      m.token_text = rec.value("token", "");
      if (rec.contains("tags")) m.tags = rec.at("tags").get<std::vector<std::string>>();
      if (rec.contains("ntp_loss_original")) {
        m.ntp_loss_original = rec.at("ntp_loss_original").get<double>();
      }
      if (rec.contains("ntp_loss_reconstructed")) {
        m.ntp_loss_reconstructed = rec.at("ntp_loss_reconstructed").get<double>();
      }
      into.meta.push_back(std::move(m));
    } catch (const json::exception& e) {
      fail(ErrorCode::kDumpFormat, "sidecar line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

void save_dump(const ActivationDataset& dataset, const std::string& path) {
  dataset.validate();
  write_file_atomic(path, serialize_dump(dataset.data));
  const auto sidecar = serialize_sidecar(dataset);
  write_file_atomic(sidecar_path(path),
                    std::span(reinterpret_cast<const std::uint8_t*>(sidecar.data()),
                              sidecar.size()));
}

ActivationDataset load_dump(const std::string& path) {
  ActivationDataset ds;
  ds.data = parse_dump(read_file_bytes(path));
  parse_sidecar(read_text(sidecar_path(path)), ds.data.rows(), ds);
  ds.validate();
  return ds;
}

std::vector<TagShare> mix_report(const ActivationDataset& dataset) {
  std::map<std::string, std::size_t> counts;
  for (const auto& m : dataset.meta) {
    ++counts[m.tags.empty() ? std::string("untagged") : m.tags.front()];
  }
  std::vector<TagShare> out;
  const double total = static_cast<double>(dataset.meta.size());
  for (const auto& [tag, count] : counts) {
    out.push_back({tag, count, total > 0 ? static_cast<double>(count) / total : 0.0});
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> ntp_losses(
    const ActivationDataset& dataset) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& m : dataset.meta) {
    if (m.ntp_loss_original && m.ntp_loss_reconstructed) {
      out.first.push_back(*m.ntp_loss_original);
      out.second.push_back(*m.ntp_loss_reconstructed);
    }
  }
  return out;
}

void TraceFile::validate() const {
  require(!tokens.empty(), "trace has no tokens");
  require(!layers.empty(), "trace has no layers");
  for (const auto& [layer, m] : layers) {
    if (m.rows() != tokens.size()) {
      fail(ErrorCode::kInvalidInput, "layer " + std::to_string(layer) + " has " +
                                         std::to_string(m.rows()) + " rows for " +
                                         std::to_string(tokens.size()) + " tokens");
    }
    require(m.cols() > 0, "layer " + std::to_string(layer) + " has empty vectors");
  }
}

TraceFile parse_trace(std::string_view text) {
  TraceFile trace;
  struct Pending {
    std::map<std::int64_t, std::vector<float>> rows;
  };
  std::map<int, Pending> pending;
  std::map<std::int64_t, std::string> token_text;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json rec = parse_json_line(lines[i], i + 1, ErrorCode::kInvalidInput);
    const auto where = "trace line " + std::to_string(i + 1) + ": ";
    if (!rec.is_object()) fail(ErrorCode::kInvalidInput, where + "expected an object");
    if (rec.contains("query_id")) {
      const auto id = rec.at("query_id").get<std::string>();
      if (!trace.query_id.empty() && trace.query_id != id) {
        fail(ErrorCode::kInvalidInput, where + "query_id changes within a trace");
      }
      trace.query_id = id;
    }
    if (!rec.contains("vector")) continue;
    try {
      const int layer = rec.at("layer").get<int>();
      const auto index = rec.at("token_index").get<std::int64_t>();
      if (index < 0) fail(ErrorCode::kInvalidInput, where + "negative token_index");
      auto vec = rec.at("vector").get<std::vector<float>>();
      for (float v : vec) {
        if (!std::isfinite(v)) fail(ErrorCode::kInvalidInput, where + "non-finite value");
      }
      const auto token = rec.value("token", std::string());
      auto [it, inserted] = token_text.emplace(index, token);
      if (!inserted && rec.contains("token") && it->second != token) {
        fail(ErrorCode::kInvalidInput, where + "token text disagrees across layers");
      }
      if (!pending[layer].rows.emplace(index, std::move(vec)).second) {
        fail(ErrorCode::kInvalidInput, where + "duplicate (layer, token_index)");
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidInput, where + e.what());
    }
  }
  std::int64_t expect = 0;
  for (auto& [index, tok] : token_text) {
    if (index != expect++) fail(ErrorCode::kInvalidInput, "trace token indices have gaps");
    trace.tokens.push_back(tok);
  }
  for (auto& [layer, p] : pending) {
    Matrix<float> m;
    for (auto& [index, vec] : p.rows) {
      if (m.rows() > 0 && vec.size() != m.cols()) {
        fail(ErrorCode::kInvalidInput,
             "layer " + std::to_string(layer) + " mixes vector dimensions");
      }
      m.append_row(vec);
    }
    trace.layers.emplace(layer, std::move(m));
  }
  trace.validate();
  return trace;
}

std::string serialize_trace(const TraceFile& trace) {
  trace.validate();
  std::string out;
  out += json{{"query_id", trace.query_id}}.dump();
  out += '\n';
  for (const auto& [layer, m] : trace.layers) {
    for (std::size_t t = 0; t < m.rows(); ++t) {
      const auto row = m.row(t);
      json rec = {{"layer", layer},
                  {"token_index", t},
                  {"token", trace.tokens[t]},
                  {"vector", std::vector<float>(row.begin(), row.end())}};
      out += rec.dump();
      out += '\n';
    }
  }
  return out;
}

TraceFile load_trace(const std::string& path) { return parse_trace(read_text(path)); }

void save_trace(const TraceFile& trace, const std::string& path) {
  const auto text = serialize_trace(trace);
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

}  // namespace saelab::ingest
