#include "cli_util.hpp"

#include <iostream>
#include <iterator>
#include <sstream>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"

namespace saelab::cli {

std::string read_text(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::istringstream conv(item);
    T v{};
    conv >> v;
    require(!conv.fail() && conv.eof(), "bad list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) { return parse_list<int>(text); }
std::vector<double> parse_real_list(const std::string& text) { return parse_list<double>(text); }

}  // namespace saelab::cli
