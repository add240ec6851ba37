#include <gtest/gtest.h>

#include <cstring>

#include "saelab/binary_io.hpp"
#include "saelab/checkpoint.hpp"
#include "saelab/error.hpp"
#include "saelab/rng.hpp"
#include "test_util.hpp"

using namespace saelab;
using saelab::testutil::source_dir;
using saelab::testutil::TempDir;

namespace {

std::string fixture(const char* name) { return (source_dir() / "tests/fixtures" / name).string(); }

template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

SaeParams noisy_params(std::size_t D, std::size_t L, bool tied, std::uint64_t seed) {
  SaeParams p(D, L, tied);
  Rng rng(seed);
  for (auto& v : p.w_enc().storage()) v = static_cast<float>(rng.normal());
  for (auto& v : p.b_enc()) v = static_cast<float>(rng.normal());
  for (auto& v : p.w_dec_storage().storage()) v = static_cast<float>(rng.normal());
  for (auto& v : p.b_dec()) v = static_cast<float>(rng.normal());
  // awkward values survive too
  p.w_enc().storage()[0] = -0.0f;
  p.b_enc()[0] = 1e-42f;
  return p;
}

}  // namespace

TEST(Crc32, KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
            0xCBF43926u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir tmp("ckpt");
  for (bool tied : {false, true}) {
    SaeConfig c;
    c.input_dim = 5;
    c.latent_dim = 11;
    c.topk = 3;
    c.seed = 0xFFFFFFFFFFFFull;
    c.tied_weights = tied;
    const auto p = noisy_params(5, 11, tied, tied ? 1 : 2);
    const auto path = tmp.file(tied ? "t.ckpt" : "u.ckpt");
    save_checkpoint(p, c, path, "2024-06-01T12:00:00Z");
    const auto ck = load_checkpoint(path);
    EXPECT_TRUE(same_bits(ck.params.w_enc().storage(), p.w_enc().storage()));
    EXPECT_TRUE(same_bits(ck.params.b_enc(), p.b_enc()));
    EXPECT_TRUE(same_bits(ck.params.w_dec_storage().storage(), p.w_dec_storage().storage()));
    EXPECT_TRUE(same_bits(ck.params.b_dec(), p.b_dec()));
    EXPECT_EQ(ck.params.tied(), tied);
    EXPECT_EQ(ck.config.input_dim, 5u);
    EXPECT_EQ(ck.config.latent_dim, 11u);
    EXPECT_EQ(ck.config.topk, 3u);
    EXPECT_EQ(ck.config.seed, 0xFFFFFFFFFFFFull);
    EXPECT_EQ(ck.created_at, "2024-06-01T12:00:00Z");
    EXPECT_EQ(serialize_checkpoint(ck.params, ck.config, ck.created_at), read_file_bytes(path));
  }
}

TEST(Checkpoint, TiedFileOmitsDecoderBlob) {
  SaeConfig c;
  c.input_dim = 4;
  c.latent_dim = 6;
  c.topk = 2;
  c.tied_weights = true;
  const auto tied = serialize_checkpoint(SaeParams(4, 6, true), c, "x");
  c.tied_weights = false;
  const auto untied = serialize_checkpoint(SaeParams(4, 6, false), c, "x");
  EXPECT_EQ(untied.size() - tied.size(), 4u * 6u * sizeof(float));
}

TEST(Checkpoint, ShippedFixtureLoads) {
  const auto ck = load_checkpoint(fixture("tiny.ckpt"));
  EXPECT_EQ(ck.config.input_dim, 2u);
  EXPECT_EQ(ck.config.latent_dim, 3u);
  EXPECT_EQ(ck.config.topk, 2u);
  EXPECT_EQ(ck.params.w_enc().storage(), (std::vector<float>{1, 0, -1, 0, 1, 1}));
  EXPECT_EQ(ck.params.w_dec_storage().storage(), (std::vector<float>{1, 0, 0, 1, -0.5f, 0.5f}));
  EXPECT_EQ(ck.params.b_dec(), (std::vector<float>{0.25f, -0.25f}));
  EXPECT_EQ(serialize_checkpoint(ck.params, ck.config, ck.created_at),
            read_file_bytes(fixture("tiny.ckpt")));
}

TEST(Checkpoint, CorruptedCrcFixtureRejected) {
  try {
    load_checkpoint(fixture("tiny_bad_crc.ckpt"));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCheckpointFormat);
    EXPECT_NE(std::string(e.what()).find("CRC"), std::string::npos);
  }
}

TEST(Checkpoint, EverySingleBitFlipInBlobDetected) {
  const auto good = read_file_bytes(fixture("tiny.ckpt"));
  const std::size_t blob_bytes = (6 + 3 + 6 + 2) * sizeof(float);
  const std::size_t blob_start = good.size() - 4 - blob_bytes;
  for (std::size_t i = blob_start; i < good.size() - 4; ++i) {
    for (int bit = 0; bit < 8; ++bit) {
      auto bad = good;
      bad[i] ^= static_cast<std::uint8_t>(1u << bit);
      EXPECT_THROW(parse_checkpoint(bad), FormatError) << "byte " << i << " bit " << bit;
    }
  }
}

TEST(Checkpoint, BadHeadersReportOffsets) {
  auto bytes = read_file_bytes(fixture("tiny.ckpt"));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    parse_checkpoint(bad_magic);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  // truncated blob
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 10);
  try {
    parse_checkpoint(truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GT(e.offset(), 12u);
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  // manifest D disagrees with the blob size
  SaeConfig c;
  c.input_dim = 2;
  c.latent_dim = 3;
  c.topk = 1;
  auto good = serialize_checkpoint(SaeParams(2, 3, false), c, "x");
  std::string text(good.begin(), good.end());
  const auto pos = text.find("D=2");
  ASSERT_NE(pos, std::string::npos);
  good[pos + 2] = '3';
  EXPECT_THROW(parse_checkpoint(good), FormatError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), Error);
}
