#pragma once

#include <string>
#include <vector>

#include <CLI11.hpp>

namespace saelab::cli {

void register_model(CLI::App& app);
void register_concepts(CLI::App& app);
void register_explain(CLI::App& app);
void register_toy(CLI::App& app);
void register_db(CLI::App& app);

// "-" means stdin / stdout.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

}  // namespace saelab::cli
