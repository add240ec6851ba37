#include "saelab/checkpoint.hpp"

#include <charconv>
#include <chrono>
#include <cstring>
#include <ctime>
#include <sstream>

#include "saelab/binary_io.hpp"
#include "saelab/error.hpp"

namespace saelab {

namespace {

constexpr std::size_t kMagicSize = 8;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::map<std::string, std::string> parse_manifest(std::string_view text,
                                                  const ByteReader& reader) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      reader.error("malformed manifest line '" + std::string(line) + "'");
    }
    out.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return out;
}

template <typename T>
T manifest_number(const std::map<std::string, std::string>& m, const std::string& key,
                  const ByteReader& reader, bool required = true, T fallback = {}) {
  const auto it = m.find(key);
  if (it == m.end()) {
    if (required) reader.error("manifest is missing '" + key + "'");
    return fallback;
  }
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return static_cast<T>(v);
    } catch (const std::exception&) {
      reader.error("manifest value for '" + key + "' is not a number");
    }
  } else {
    T v{};
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      reader.error("manifest value for '" + key + "' is not an integer");
    }
    return v;
  }
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::uint8_t> serialize_checkpoint(const SaeParams& params,
                                               const SaeConfig& config,
                                               const std::string& created_at) {
  require(params.input_dim() == config.input_dim &&
              params.latent_dim() == config.latent_dim &&
              params.tied() == config.tied_weights,
          "checkpoint parameters do not match the config");
  require(created_at.find('\n') == std::string::npos, "created_at must be one line");
  std::ostringstream manifest;
  manifest << "D=" << config.input_dim << '\n'
           << "L=" << config.latent_dim << '\n'
           << "k=" << config.topk << '\n'
           << "tied=" << (config.tied_weights ? 1 : 0) << '\n'
           << "seed=" << config.seed << '\n'
           << "created-at=" << created_at << '\n'
           << "expansion=" << format_double(config.expansion_factor) << '\n'
           << "learning-rate=" << format_double(config.learning_rate) << '\n'
           << "epochs=" << config.epochs << '\n'
           << "batch-size=" << config.batch_size << '\n';
  const std::string text = manifest.str();

  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, kMagicSize));
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  const std::size_t blob_start = w.size();
  w.f32(params.w_enc().flat());
  w.f32(params.b_enc());
  if (!params.tied()) w.f32(params.w_dec_storage().flat());
  w.f32(params.b_dec());
  const std::uint32_t crc = crc32(w.tail(blob_start));
  w.u32(crc);
  return w.buffer();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kCheckpointFormat);
  if (r.bytes(kMagicSize, "magic") != std::string_view(kCheckpointMagic, kMagicSize)) {
    throw FormatError(ErrorCode::kCheckpointFormat, 0, "bad checkpoint magic");
  }
  const std::uint32_t manifest_len = r.u32("manifest length");
  const auto text = r.bytes(manifest_len, "manifest");
  Checkpoint ckpt;
  ckpt.manifest = parse_manifest(text, r);
  const auto& m = ckpt.manifest;
  SaeConfig& c = ckpt.config;
  c.input_dim = manifest_number<std::size_t>(m, "D", r);
  c.latent_dim = manifest_number<std::size_t>(m, "L", r);
  c.topk = manifest_number<std::size_t>(m, "k", r);
  const int tied = manifest_number<int>(m, "tied", r);
  if (tied != 0 && tied != 1) r.error("manifest 'tied' must be 0 or 1");
  c.tied_weights = tied == 1;
  c.seed = manifest_number<std::uint64_t>(m, "seed", r);
  c.expansion_factor = manifest_number<double>(m, "expansion", r, false, 0.0);
  c.learning_rate = manifest_number<double>(m, "learning-rate", r, false, c.learning_rate);
  c.epochs = manifest_number<int>(m, "epochs", r, false, c.epochs);
  c.batch_size = manifest_number<std::size_t>(m, "batch-size", r, false, c.batch_size);
  if (const auto it = m.find("created-at"); it != m.end()) ckpt.created_at = it->second;
  if (c.input_dim == 0 || c.latent_dim == 0 || c.topk > c.latent_dim) {
    r.error("manifest dimensions are invalid");
  }

  const std::size_t d = c.input_dim;
  const std::size_t l = c.latent_dim;
  const std::size_t floats = d * l + l + (c.tied_weights ? 0 : l * d) + d;
  const std::size_t blob_start = r.offset();
  const std::size_t expected = floats * sizeof(float) + sizeof(std::uint32_t);
  if (r.remaining() != expected) {
    r.error(std::string(r.remaining() < expected ? "truncated blob" : "trailing bytes after blob") +
            ": manifest dimensions (D=" + std::to_string(d) + ", L=" + std::to_string(l) +
            ") imply " + std::to_string(expected) + " blob bytes, file has " +
            std::to_string(r.remaining()));
  }
  ckpt.params = SaeParams(d, l, c.tied_weights);
  r.f32(ckpt.params.w_enc().flat(), "W_enc");
  r.f32(ckpt.params.b_enc(), "b_enc");
  if (!c.tied_weights) r.f32(ckpt.params.w_dec_storage().flat(), "W_dec");
  r.f32(ckpt.params.b_dec(), "b_dec");
  const std::size_t blob_end = r.offset();
  const std::uint32_t stored = r.u32("checksum");
  if (stored != crc32(r.span(blob_start, blob_end))) {
    throw FormatError(ErrorCode::kCheckpointFormat, blob_end, "checkpoint CRC mismatch");
  }
  return ckpt;
}

void save_checkpoint(const SaeParams& params, const SaeConfig& config,
                     const std::string& path, std::string created_at) {
  if (created_at.empty()) created_at = utc_timestamp();
  const auto bytes = serialize_checkpoint(params, config, created_at);
  write_file_atomic(path, bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file_bytes(path));
}

}  // namespace saelab
