#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "saelab/error.hpp"

namespace saelab::db {

struct NeuronRecord {
  int layer = 0;
  std::uint32_t index = 0;
  std::string explanation;
  double corr_score = 0.0;
  double sp_score = 0.0;
  // "level0" or "level0/level1" entries, kept sorted and unique.
  std::vector<std::string> safety_tags;
  std::map<std::string, double> freq_by_concept;
  // Dataset maximum activation used for normalization; 0 when unknown.
  double max_activation = 0.0;
  std::string created_at;

  friend bool operator==(const NeuronRecord&, const NeuronRecord&) = default;
};

nlohmann::json to_json(const NeuronRecord& record);
// Strict: unknown keys and wrong types are rejected with kValidation.
NeuronRecord record_from_json(const nlohmann::json& j);

// Problems with a record, empty when it is valid.
std::vector<std::string> record_problems(const NeuronRecord& record);

// True when `tag` equals a safety tag or one of its two levels.
bool has_tag(const NeuronRecord& record, std::string_view tag);

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> offending);
  const std::vector<std::string>& offending() const noexcept { return offending_; }

 private:
  std::vector<std::string> offending_;
};

struct NeuronQuery {
  std::optional<std::string> tag;
  std::optional<int> layer;
  std::optional<double> min_corr;
  std::optional<std::string> text;  // case-insensitive substring of the explanation
  std::size_t page = 0;
  std::size_t page_size = 50;

  // Throws kQuery for malformed filters.
  void validate() const;
};

inline constexpr std::size_t kMaxPageSize = 1000;

struct QueryPage {
  std::vector<NeuronRecord> records;
  std::size_t total = 0;
  std::size_t page = 0;
  std::size_t page_size = 0;
};

// Header line, one canonical record per line, then a trailer with the record
// count and the CRC-32 of the record lines.
std::string serialize_store(std::span<const NeuronRecord> records);
std::vector<NeuronRecord> parse_store(std::string_view text);

// Records only, one per line.
std::string export_jsonl(std::span<const NeuronRecord> records);
std::vector<NeuronRecord> parse_jsonl(std::string_view text);

// Thread-safe: readers share a lock, writers are serialized. A store with a
// path persists every write by atomic replace.
class NeuronDb {
 public:
  NeuronDb() = default;
  explicit NeuronDb(std::filesystem::path path);

  NeuronDb(const NeuronDb&) = delete;
  NeuronDb& operator=(const NeuronDb&) = delete;

  // Insert-or-replace by (layer, index); all records are validated first.
  // Returns the number of records held afterwards.
  std::size_t upsert(std::span<const NeuronRecord> records);

  std::optional<NeuronRecord> get(int layer, std::uint32_t index) const;
  // Ordered by corr_score desc, then layer, then index.
  QueryPage query(const NeuronQuery& q) const;
  // Ordered by (layer, index).
  std::vector<NeuronRecord> all() const;
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void persist_locked() const;

  std::filesystem::path path_;
  std::map<std::pair<int, std::uint32_t>, NeuronRecord> records_;
  mutable std::shared_mutex mu_;
};

}  // namespace saelab::db
