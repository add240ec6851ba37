#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "saelab/sae.hpp"

namespace saelab {

// On-disk layout:
//   "SSAILCKP" | u32 manifest length | UTF-8 manifest (key=value lines)
//   | f32 W_enc (D*L) | f32 b_enc (L) | f32 W_dec (L*D, absent when tied)
//   | f32 b_dec (D) | u32 CRC-32 of the blob section.
inline constexpr char kCheckpointMagic[] = "SSAILCKP";

struct Checkpoint {
  SaeParams params;
  SaeConfig config;
  std::string created_at;
  std::map<std::string, std::string> manifest;
};

std::vector<std::uint8_t> serialize_checkpoint(const SaeParams& params,
                                               const SaeConfig& config,
                                               const std::string& created_at);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

// created_at defaults to the current UTC time.
void save_checkpoint(const SaeParams& params, const SaeConfig& config,
                     const std::string& path, std::string created_at = {});
Checkpoint load_checkpoint(const std::string& path);

std::string utc_timestamp();

}  // namespace saelab
