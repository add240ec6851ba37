#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saelab/matrix.hpp"

namespace saelab::ingest {

inline constexpr char kDumpMagic[] = "SSAILACT";
inline constexpr std::uint32_t kDumpVersion = 1;

struct RowMeta {
  std::string query_id;
  std::int64_t token_index = 0;
  std::string token_text;
  std::vector<std::string> tags;  // first entry is the primary tag
  std::optional<double> ntp_loss_original;
  std::optional<double> ntp_loss_reconstructed;

  friend bool operator==(const RowMeta&, const RowMeta&) = default;
};

// Host-model hidden vectors, one row per token, with per-row metadata.
struct ActivationDataset {
  Matrix<float> data;
  std::vector<RowMeta> meta;
  std::string location;  // which hidden signal the producer captured

  std::size_t dim() const noexcept { return data.cols(); }
  std::size_t rows() const noexcept { return data.rows(); }
  void validate() const;
};

// Rows of one query; rows of a query must be contiguous in the dump.
struct QuerySpan {
  std::string query_id;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<QuerySpan> query_spans(const ActivationDataset& dataset);
std::map<std::string, QuerySpan> query_index(const ActivationDataset& dataset);

// Dump: magic | u32 version | u32 dim | u64 rows | f32 row-major blob | u32 CRC.
std::vector<std::uint8_t> serialize_dump(const Matrix<float>& data);
Matrix<float> parse_dump(std::span<const std::uint8_t> bytes);

// Sidecar: a header line then one JSON record per row.
std::string serialize_sidecar(const ActivationDataset& dataset);
void parse_sidecar(std::string_view text, std::size_t expected_rows,
                   ActivationDataset& into);

std::string sidecar_path(const std::string& dump_path);

// Writes `path` and its sidecar next to it.
void save_dump(const ActivationDataset& dataset, const std::string& path);
ActivationDataset load_dump(const std::string& path);

struct TagShare {
  std::string tag;
  std::size_t count = 0;
  double fraction = 0.0;
};

// Histogram of primary tags; untagged rows are reported as "untagged".
std::vector<TagShare> mix_report(const ActivationDataset& dataset);

// Rows carrying both NTP losses, as (original, reconstructed).
std::pair<std::vector<double>, std::vector<double>> ntp_losses(
    const ActivationDataset& dataset);

// Per-token, per-layer hidden vectors for a single query.
struct TraceFile {
  std::string query_id;
  std::vector<std::string> tokens;
  std::map<int, Matrix<float>> layers;  // each has tokens.size() rows

  void validate() const;
};

// Line-delimited records: an optional {"query_id": ...} header, then one
// {"layer", "token_index", "token", "vector"} record per (layer, token).
TraceFile parse_trace(std::string_view text);
std::string serialize_trace(const TraceFile& trace);
TraceFile load_trace(const std::string& path);
void save_trace(const TraceFile& trace, const std::string& path);

}  // namespace saelab::ingest
