#include "saelab/neuron_db.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <set>

#include "saelab/binary_io.hpp"

namespace saelab::db {

using nlohmann::json;

namespace {

constexpr const char* kStoreFormat = "saelab-neurondb";
constexpr int kStoreVersion = 1;

std::string key_of(int layer, std::uint32_t index) {
  return std::to_string(layer) + ":" + std::to_string(index);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void normalize_tags(NeuronRecord& r) {
  std::sort(r.safety_tags.begin(), r.safety_tags.end());
  r.safety_tags.erase(std::unique(r.safety_tags.begin(), r.safety_tags.end()),
                      r.safety_tags.end());
}

struct Line {
  std::string_view text;
  std::size_t offset;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(Line{line, pos});
    pos = nl + 1;
  }
  return out;
}

}  // namespace

json to_json(const NeuronRecord& r) {
  return json{{"layer", r.layer},
              {"index", r.index},
              {"explanation", r.explanation},
              {"corr_score", r.corr_score},
              {"sp_score", r.sp_score},
              {"safety_tags", r.safety_tags},
              {"freq_by_concept", r.freq_by_concept},
              {"max_activation", r.max_activation},
              {"created_at", r.created_at}};
}

NeuronRecord record_from_json(const json& j) {
  static const std::set<std::string> known{"layer",          "index",          "explanation",
                                           "corr_score",     "sp_score",       "safety_tags",
                                           "freq_by_concept", "max_activation", "created_at"};
  if (!j.is_object()) fail(ErrorCode::kValidation, "neuron record must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) fail(ErrorCode::kValidation, "unknown record field '" + it.key() + "'");
  }
  NeuronRecord r;
  try {
    const auto& layer = j.at("layer");
    const auto& index = j.at("index");
    if (!layer.is_number_integer() || !index.is_number_unsigned()) {
      fail(ErrorCode::kValidation, "layer and index must be integers, index non-negative");
    }
    r.layer = layer.get<int>();
    r.index = index.get<std::uint32_t>();
    r.explanation = j.at("explanation").get<std::string>();
    r.corr_score = j.at("corr_score").get<double>();
    if (auto it = j.find("sp_score"); it != j.end()) r.sp_score = it->get<double>();
    if (auto it = j.find("safety_tags"); it != j.end()) {
      r.safety_tags = it->get<std::vector<std::string>>();
    }
    if (auto it = j.find("freq_by_concept"); it != j.end()) {
      r.freq_by_concept = it->get<std::map<std::string, double>>();
    }
    if (auto it = j.find("max_activation"); it != j.end()) r.max_activation = it->get<double>();
    if (auto it = j.find("created_at"); it != j.end()) r.created_at = it->get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kValidation, std::string("malformed neuron record: ") + e.what());
  }
  normalize_tags(r);
  return r;
}

std::vector<std::string> record_problems(const NeuronRecord& r) {
  std::vector<std::string> out;
  if (r.layer < 0) out.push_back("layer must be non-negative");
  if (r.explanation.empty()) out.push_back("explanation must not be empty");
  if (!(r.corr_score >= -1.0 && r.corr_score <= 1.0)) out.push_back("corr_score outside [-1, 1]");
  if (!(r.sp_score >= 0.0 && r.sp_score <= 10.0)) out.push_back("sp_score outside [0, 10]");
  if (!(r.max_activation >= 0.0) || !std::isfinite(r.max_activation)) {
    out.push_back("max_activation must be finite and non-negative");
  }
  for (const auto& tag : r.safety_tags) {
    if (tag.empty() || tag.front() == '/' || tag.back() == '/' ||
        std::count(tag.begin(), tag.end(), '/') > 1) {
      out.push_back("malformed safety tag '" + tag + "'");
    }
  }
  for (const auto& [concept_name, f] : r.freq_by_concept) {
    if (!(f >= 0.0 && f <= 1.0)) out.push_back("freq for '" + concept_name + "' outside [0, 1]");
  }
  return out;
}

bool has_tag(const NeuronRecord& r, std::string_view tag) {
  for (const auto& t : r.safety_tags) {
    if (t == tag) return true;
    const auto slash = t.find('/');
    if (slash == std::string::npos) continue;
    if (std::string_view(t).substr(0, slash) == tag || std::string_view(t).substr(slash + 1) == tag) {
      return true;
    }
  }
  return false;
}

ValidationError::ValidationError(std::vector<std::string> offending)
    : Error(ErrorCode::kValidation,
            [&] {
              std::string msg = "invalid neuron records:";
              for (const auto& o : offending) msg += " [" + o + "]";
              return msg;
            }()),
      offending_(std::move(offending)) {}

void NeuronQuery::validate() const {
  if (tag && tag->empty()) fail(ErrorCode::kQuery, "tag filter must not be empty");
  if (min_corr && !(*min_corr >= -1.0 && *min_corr <= 1.0)) {
    fail(ErrorCode::kQuery, "min_corr must lie in [-1, 1]");
  }
  if (page_size < 1 || page_size > kMaxPageSize) {
    fail(ErrorCode::kQuery, "page_size must lie in [1, " + std::to_string(kMaxPageSize) + "]");
  }
}

std::string serialize_store(std::span<const NeuronRecord> records) {
  std::string body;
  for (const auto& r : records) {
    body += to_json(r).dump();
    body.push_back('\n');
  }
  const auto crc = crc32(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
  std::string out = json{{"format", kStoreFormat}, {"version", kStoreVersion}}.dump();
  out.push_back('\n');
  out += body;
  out += json{{"count", records.size()}, {"crc32", crc}}.dump();
  out.push_back('\n');
  return out;
}

std::vector<NeuronRecord> parse_store(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw FormatError(ErrorCode::kValidation, 0, "neuron store is truncated");
  auto parse_line = [](const Line& line) {
    try {
      return json::parse(line.text);
    } catch (const json::exception&) {
      throw FormatError(ErrorCode::kValidation, line.offset, "neuron store line is not JSON");
    }
  };
  const auto header = parse_line(lines.front());
  if (!header.is_object() || header.value("format", "") != kStoreFormat ||
      header.value("version", 0) != kStoreVersion) {
    throw FormatError(ErrorCode::kValidation, 0, "not a neuron store (bad header)");
  }
  const auto trailer = parse_line(lines.back());
  if (!trailer.is_object() || !trailer.contains("count") || !trailer.contains("crc32")) {
    throw FormatError(ErrorCode::kValidation, lines.back().offset, "neuron store trailer missing");
  }
  const std::size_t body_begin = lines[1].offset;
  const std::size_t body_end = lines.back().offset;
  const auto body = text.substr(body_begin, body_end - body_begin);
  const auto crc = crc32(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
  if (crc != trailer["crc32"].get<std::uint32_t>()) {
    throw FormatError(ErrorCode::kValidation, body_begin, "neuron store checksum mismatch");
  }
  std::vector<NeuronRecord> out;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    try {
      out.push_back(record_from_json(parse_line(lines[i])));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(ErrorCode::kValidation, lines[i].offset, e.what());
    }
  }
  if (out.size() != trailer["count"].get<std::size_t>()) {
    throw FormatError(ErrorCode::kValidation, lines.back().offset,
                      "neuron store record count disagrees with trailer");
  }
  return out;
}

std::string export_jsonl(std::span<const NeuronRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<NeuronRecord> parse_jsonl(std::string_view text) {
  std::vector<NeuronRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    try {
      out.push_back(record_from_json(json::parse(line.text)));
    } catch (const json::exception& e) {
      fail(ErrorCode::kValidation, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorCode::kValidation, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

NeuronDb::NeuronDb(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  const auto bytes = read_file_bytes(path_.string());
  for (auto& r : parse_store(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()))) {
    const auto key = std::make_pair(r.layer, r.index);
    records_[key] = std::move(r);
  }
}

std::size_t NeuronDb::upsert(std::span<const NeuronRecord> records) {
  std::vector<std::string> offending;
  std::set<std::pair<int, std::uint32_t>> seen;
  for (const auto& r : records) {
    for (const auto& p : record_problems(r)) offending.push_back(key_of(r.layer, r.index) + ": " + p);
    if (!seen.insert({r.layer, r.index}).second) {
      offending.push_back(key_of(r.layer, r.index) + ": duplicated in batch");
    }
  }
  if (!offending.empty()) throw ValidationError(std::move(offending));
  std::unique_lock lock(mu_);
  auto next = records_;
  for (auto r : records) {
    normalize_tags(r);
    next[{r.layer, r.index}] = std::move(r);
  }
  std::swap(records_, next);
  try {
    persist_locked();
  } catch (...) {
    std::swap(records_, next);
    throw;
  }
  return records_.size();
}

void NeuronDb::persist_locked() const {
  if (path_.empty()) return;
  std::vector<NeuronRecord> ordered;
  ordered.reserve(records_.size());
  for (const auto& [key, r] : records_) ordered.push_back(r);
  const auto text = serialize_store(ordered);
  write_file_atomic(path_.string(),
                    std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::optional<NeuronRecord> NeuronDb::get(int layer, std::uint32_t index) const {
  std::shared_lock lock(mu_);
  if (auto it = records_.find({layer, index}); it != records_.end()) return it->second;
  return std::nullopt;
}

QueryPage NeuronDb::query(const NeuronQuery& q) const {
  q.validate();
  const auto needle = q.text ? lower(*q.text) : std::string();
  std::vector<const NeuronRecord*> hits;
  std::shared_lock lock(mu_);
  for (const auto& [key, r] : records_) {
    if (q.layer && r.layer != *q.layer) continue;
    if (q.min_corr && r.corr_score < *q.min_corr) continue;
    if (q.tag && !has_tag(r, *q.tag)) continue;
    if (q.text && lower(r.explanation).find(needle) == std::string::npos) continue;
    hits.push_back(&r);
  }
  std::sort(hits.begin(), hits.end(), [](const NeuronRecord* a, const NeuronRecord* b) {
    if (a->corr_score != b->corr_score) return a->corr_score > b->corr_score;
    if (a->layer != b->layer) return a->layer < b->layer;
    return a->index < b->index;
  });
  QueryPage page;
  page.total = hits.size();
  page.page = q.page;
  page.page_size = q.page_size;
  const std::size_t begin =
      q.page > hits.size() ? hits.size() : std::min(hits.size(), q.page * q.page_size);
  const std::size_t end = std::min(hits.size(), begin + q.page_size);
  for (std::size_t i = begin; i < end; ++i) page.records.push_back(*hits[i]);
  return page;
}

std::vector<NeuronRecord> NeuronDb::all() const {
  std::shared_lock lock(mu_);
  std::vector<NeuronRecord> out;
  out.reserve(records_.size());
  for (const auto& [key, r] : records_) out.push_back(r);
  return out;
}

std::size_t NeuronDb::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

}  // namespace saelab::db
