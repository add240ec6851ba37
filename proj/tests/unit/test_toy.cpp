#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "saelab/error.hpp"
#include "saelab/rng.hpp"
#include "saelab/toy_model.hpp"

using namespace saelab;
using namespace saelab::toy;

namespace {

ToyConfig small_config() {
  ToyConfig c;
  c.input_dim = 6;
  c.latent_dim = 12;
  c.samples_per_set = 32;
  c.k_min = 1;
  c.k_max = 4;
  c.epochs = 15;
  c.batch_size = 16;
  c.seed = 5;
  return c;
}

double row_cos(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST(ToyData, DeterministicPerSeed) {
  const ToyConfig c;
  const auto a = gen_toy_data(c);
  const auto b = gen_toy_data(c);
  ASSERT_EQ(a.safety.size(), b.safety.size());
  EXPECT_EQ(0, std::memcmp(a.safety.storage().data(), b.safety.storage().data(),
                           a.safety.size() * sizeof(float)));
  EXPECT_EQ(0, std::memcmp(a.random.storage().data(), b.random.storage().data(),
                           a.random.size() * sizeof(float)));
  auto other = c;
  other.seed = 1;
  EXPECT_NE(gen_toy_data(other).safety_direction, a.safety_direction);
}

TEST(ToyData, SafetyRowsAreScaledCopiesOfOneDirection) {
  const ToyConfig c;
  const auto d = gen_toy_data(c);
  ASSERT_EQ(d.safety.rows(), c.samples_per_set);
  ASSERT_EQ(d.random.rows(), c.samples_per_set);
  double norm = 0;
  for (float v : d.safety_direction) norm += double(v) * v;
  EXPECT_NEAR(norm, 1.0, 1e-6);
  for (std::size_t i = 0; i < d.safety.rows(); ++i) {
    const double a = d.safety_scales[i];
    EXPECT_GE(std::abs(a), 0.5);
    EXPECT_LE(std::abs(a), 2.0);
    for (std::size_t k = 0; k < c.input_dim; ++k) {
      EXPECT_NEAR(d.safety(i, k), a * d.safety_direction[k], 1e-6);
    }
    EXPECT_NEAR(std::abs(row_cos(d.safety.row(i), d.safety_direction)), 1.0, 1e-6);
  }
}

TEST(ToyData, RandomRowsAreDistinctDirections) {
  const ToyConfig c;
  const auto d = gen_toy_data(c);
  for (std::size_t i = 0; i < d.random.rows(); ++i) {
    double sq = 0;
    for (float v : d.random.row(i)) sq += double(v) * v;
    EXPECT_NEAR(std::sqrt(sq), std::abs(d.random_scales[i]), 1e-5);
    for (std::size_t j = i + 1; j < d.random.rows(); ++j) {
      EXPECT_LT(std::abs(row_cos(d.random.row(i), d.random.row(j))), 0.99);
    }
  }
}

TEST(ToyData, WeightsAndStacking) {
  const auto d = gen_toy_data(small_config());
  const auto w = d.weights(0.1);
  const auto s = d.stacked();
  ASSERT_EQ(w.size(), 64u);
  ASSERT_EQ(s.rows(), 64u);
  EXPECT_EQ(w[0], 0.1);
  EXPECT_EQ(w[31], 0.1);
  EXPECT_EQ(w[32], 1.0);
  EXPECT_EQ(s(0, 0), d.safety(0, 0));
  EXPECT_EQ(s(32, 3), d.random(0, 3));
}

TEST(ToyConfigCheck, Rejections) {
  auto c = small_config();
  c.k_max = 13;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.k_min = 5;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.safety_coeff = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ToyTrain, UnitCoefficientEqualsUnweighted) {
  const auto d = gen_toy_data(small_config());
  ToyTrainSettings s;
  s.epochs = 10;
  s.batch_size = 16;
  s.seed = 3;
  const auto weighted = train_tied_sae(d, 12, 3, 1.0, s);

  SaeConfig cfg;
  cfg.input_dim = 6;
  cfg.latent_dim = 12;
  cfg.topk = 3;
  cfg.tied_weights = true;
  cfg.seed = 3;
  cfg.epochs = 10;
  cfg.learning_rate = s.learning_rate;
  cfg.batch_size = 16;
  const auto plain = train(d.stacked(), cfg);
  EXPECT_EQ(weighted.params.w_enc().storage(), plain.params.w_enc().storage());
  EXPECT_EQ(weighted.params.b_dec(), plain.params.b_dec());
  EXPECT_EQ(weighted.history.back().l2_loss, plain.history.back().l2_loss);
}

TEST(ToyTrain, StaysTiedEveryEpoch) {
  const auto d = gen_toy_data(small_config());
  ToyTrainSettings s;
  s.epochs = 5;
  int seen = 0;
  s.on_epoch = [&](const TrainStats&, const SaeParams& p) {
    ++seen;
    ASSERT_TRUE(p.tied());
    const auto dec = p.decoder_matrix();
    for (std::size_t j = 0; j < p.latent_dim(); ++j) {
      for (std::size_t k = 0; k < p.input_dim(); ++k) EXPECT_EQ(dec(j, k), p.w_enc()(k, j));
    }
  };
  train_tied_sae(d, 12, 2, 0.1, s);
  EXPECT_EQ(seen, 5);
}

TEST(ToyTrain, DenseCodeReconstructsBetterThanSingleLatent) {
  const auto d = gen_toy_data(small_config());
  ToyTrainSettings s;
  s.epochs = 80;
  s.batch_size = 16;
  const double sparse = train_tied_sae(d, 12, 1, 1.0, s).history.back().l2_loss;
  const double dense = train_tied_sae(d, 12, 12, 1.0, s).history.back().l2_loss;
  EXPECT_LT(dense, sparse);
}

TEST(Interference, OrthogonalRowsAreZero) {
  Matrix<float> w(3, 4, 0.0f);
  w(0, 0) = 1;
  w(1, 1) = -2;
  w(2, 3) = 0.5;
  const auto i = feature_interference(w);
  EXPECT_EQ(i.avg, 0.0);
  EXPECT_EQ(i.max, 0.0);
  EXPECT_EQ(i.gram(1, 1), 1.0);
}

TEST(Interference, DuplicateRowIsMaximal) {
  Matrix<float> w(3, 2, 0.0f);
  w(0, 0) = 1;
  w(1, 1) = 1;
  w(2, 0) = -3;  // antiparallel counts as the same feature
  const auto i = feature_interference(w);
  EXPECT_NEAR(i.max, 1.0, 1e-12);
  EXPECT_NEAR(i.avg, 1.0 / 3.0, 1e-12);
}

TEST(Interference, ZeroRowsExcluded) {
  Matrix<float> w(3, 2, 0.0f);
  w(0, 0) = 1;
  w(1, 0) = 1;
  w(1, 1) = 1;
  const auto i = feature_interference(w);
  EXPECT_EQ(i.zero_rows, std::vector<std::size_t>{2});
  EXPECT_NEAR(i.avg, std::sqrt(0.5), 1e-12);
  EXPECT_THROW(feature_interference(Matrix<float>(2, 2, 0.0f)), Error);
}

TEST(Interference, MatchesPairLoop) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix<float> w(5, 3);
    for (auto& v : w.storage()) v = static_cast<float>(rng.normal());
    const auto got = feature_interference(w);
    double sum = 0, mx = 0;
    int pairs = 0;
    for (std::size_t a = 0; a < 5; ++a) {
      for (std::size_t b = 0; b < 5; ++b) {
        if (a == b) continue;
        const double c = std::abs(row_cos(w.row(a), w.row(b)));
        EXPECT_NEAR(got.gram(a, b), c, 1e-9);
        sum += c;
        mx = std::max(mx, c);
        ++pairs;
      }
    }
    EXPECT_NEAR(got.avg, sum / pairs, 1e-9);
    EXPECT_NEAR(got.max, mx, 1e-9);
  }
}

TEST(Distinguishable, ZeroEncoderActivatesNothing) {
  const auto d = gen_toy_data(small_config());
  SaeParams p(6, 12, true);
  const auto g = distinguishable_count(p, d, 3);
  EXPECT_EQ(g.g, 0u);
  EXPECT_EQ(g.safety_only, 0u);
}

TEST(Distinguishable, MatchesScanOracle) {
  const auto d = gen_toy_data(small_config());
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    SaeParams p(6, 12, true);
    for (auto& v : p.w_enc().storage()) v = static_cast<float>(rng.normal());
    for (auto& v : p.b_enc()) v = static_cast<float>(rng.normal() * 0.5);
    const std::size_t k = 1 + rng.below(6);
    const auto got = distinguishable_count(p, d, k);
    std::vector<bool> s(12, false), r(12, false);
    for (std::size_t i = 0; i < d.safety.rows(); ++i) {
      const auto pre = preactivations(d.safety.row(i), p);
      for (auto j : topk_indices(pre, k)) s[j] = s[j] || pre[j] > 0;
    }
    for (std::size_t i = 0; i < d.random.rows(); ++i) {
      const auto pre = preactivations(d.random.row(i), p);
      for (auto j : topk_indices(pre, k)) r[j] = r[j] || pre[j] > 0;
    }
    std::size_t g = 0, so = 0, ro = 0;
    for (std::size_t j = 0; j < 12; ++j) {
      g += s[j] != r[j];
      so += s[j] && !r[j];
      ro += r[j] && !s[j];
    }
    EXPECT_EQ(got.g, g);
    EXPECT_EQ(got.safety_only, so);
    EXPECT_EQ(got.random_only, ro);
    EXPECT_EQ(got.g, got.safety_only + got.random_only);
  }
}

TEST(Sweep, RowsAndSelection) {
  const auto c = small_config();
  std::vector<std::size_t> sunk;
  const auto r = sweep(c, [&](std::size_t k, const Interference&) { sunk.push_back(k); });
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(sunk, (std::vector<std::size_t>{1, 2, 3, 4}));
  std::size_t best_g = 0, best_i = 0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].k, i + 1);
    EXPECT_LE(r.rows[i].g, c.latent_dim);
    EXPECT_LE(r.rows[i].interference_avg, r.rows[i].interference_max);
    if (r.rows[i].g > r.rows[best_g].g) best_g = i;
    if (r.rows[i].interference_avg < r.rows[best_i].interference_avg) best_i = i;
  }
  EXPECT_EQ(r.argmax_g_k, r.rows[best_g].k);
  EXPECT_EQ(r.argmin_interference_k, r.rows[best_i].k);
}

TEST(Sweep, Deterministic) {
  const auto c = small_config();
  const auto a = sweep(c);
  const auto b = sweep(c);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].g, b.rows[i].g);
    EXPECT_EQ(a.rows[i].interference_avg, b.rows[i].interference_avg);
    EXPECT_EQ(a.rows[i].final_loss, b.rows[i].final_loss);
  }
}
