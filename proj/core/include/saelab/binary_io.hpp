#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saelab/error.hpp"

namespace saelab {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(std::span<const float> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    buf_.insert(buf_.end(), p, p + values.size_bytes());
  }
  std::size_t size() const noexcept { return buf_.size(); }
  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
  std::span<const std::uint8_t> tail(std::size_t from) const {
    return std::span<const std::uint8_t>(buf_).subspan(from);
  }

 private:
  template <typename T>
  void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader; every failure reports the byte offset.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, ErrorCode code)
      : data_(data), code_(code) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  std::string_view bytes(std::size_t n, std::string_view what) {
    need(n, what);
    std::string_view s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(std::string_view what) { return get<std::uint32_t>(what); }
  std::uint64_t u64(std::string_view what) { return get<std::uint64_t>(what); }
  void f32(std::span<float> out, std::string_view what) {
    need(out.size_bytes(), what);
    std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }
  std::span<const std::uint8_t> span(std::size_t from, std::size_t to) const {
    return data_.subspan(from, to - from);
  }

  [[noreturn]] void error(const std::string& message) const {
    throw FormatError(code_, pos_, message);
  }

 private:
  void need(std::size_t n, std::string_view what) const {
    if (n > remaining()) {
      error("truncated " + std::string(what) + ": need " + std::to_string(n) +
            " bytes, have " + std::to_string(remaining()));
    }
  }
  template <typename T>
  T get(std::string_view what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  ErrorCode code_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

// Writes to a sibling temp file, fsyncs, then renames over `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace saelab
