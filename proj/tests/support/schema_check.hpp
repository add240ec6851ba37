#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace saelab::testutil {

// Draft-07 subset used by the shipped schemas: type, const, enum, properties,
// required, additionalProperties, items, min/maxItems, uniqueItems, minLength,
// pattern, minimum, maximum, exclusiveMinimum, oneOf, anyOf and $ref to a
// sibling file or a local "#/definitions/..." pointer.
class SchemaSet {
 public:
  explicit SchemaSet(std::filesystem::path dir);

  // Empty when `value` conforms; otherwise one line per violation.
  std::vector<std::string> validate(const std::string& schema_file,
                                    const nlohmann::json& value) const;

 private:
  const nlohmann::json& load(const std::string& file) const;
  void check(const std::string& file, const nlohmann::json& schema,
             const nlohmann::json& value, const std::string& where,
             std::vector<std::string>& errors) const;

  std::filesystem::path dir_;
  mutable std::map<std::string, nlohmann::json> cache_;
};

}  // namespace saelab::testutil
