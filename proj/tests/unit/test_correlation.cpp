#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "saelab/correlation.hpp"
#include "saelab/error.hpp"
#include "saelab/rng.hpp"

using namespace saelab;

namespace {

std::vector<double> series(Rng& rng, std::size_t n, int distinct) {
  std::vector<double> v(n);
  for (auto& x : v) x = distinct > 0 ? static_cast<double>(rng.below(distinct)) : rng.normal();
  return v;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

}  // namespace

TEST(Pearson, Examples) {
  const std::vector<double> a{0, 1, 2, 3}, b{1, 3, 5, 9};
  EXPECT_NEAR(pearson(a, b), 0.9827076298239908, 1e-12);
  EXPECT_NEAR(pearson(a, a), 1.0, 1e-15);
  const std::vector<double> neg{3, 2, 1, 0};
  EXPECT_NEAR(pearson(a, neg), -1.0, 1e-15);
}

TEST(Pearson, UndefinedAndInvalid) {
  const std::vector<double> a{1, 2, 3}, flat{2, 2, 2}, shorter{1, 2};
  try {
    pearson(a, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedCorrelation);
  }
  EXPECT_THROW(pearson(a, shorter), Error);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
  EXPECT_THROW(pearson(std::vector<double>{1, NAN}, std::vector<double>{1, 2}), Error);
}

TEST(Pearson, MatchesClosedFormAndProperties) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = series(rng, 2 + rng.below(60), trial % 3 == 0 ? 4 : 0);
    const auto y = series(rng, x.size(), trial % 5 == 0 ? 3 : 0);
    if (constant(x) || constant(y)) continue;
    const double r = pearson(x, y);
    EXPECT_NEAR(r, oracle::pearson_naive(x, y), 1e-10);
    EXPECT_LE(std::abs(r), 1.0);
    EXPECT_NEAR(pearson(y, x), r, 1e-14);
    std::vector<double> affine(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) affine[i] = 3.5 * x[i] - 7.0;
    EXPECT_NEAR(pearson(affine, y), r, 1e-10);
  }
}

TEST(Kendall, Examples) {
  const std::vector<double> a{1, 2, 3, 4, 5}, rev{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau_b(a, a), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau_b(a, rev), -1.0);
  // published reference values for these two series
  const std::vector<double> v1{17, 86, 60, 77, 47, 3, 70, 87, 88, 92};
  const std::vector<double> v2{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
  EXPECT_NEAR(kendall_tau_b(v1, v2), -0.06666666666666667, 1e-15);
  const std::vector<double> v1t{17, 86, 60, 77, 47, 3, 70, 47, 88, 92};
  EXPECT_NEAR(kendall_tau_b(v1t, v2), 0.04494665749754947, 1e-15);
}

TEST(Kendall, AllTiedIsUndefined) {
  const std::vector<double> a{1, 2, 3}, flat{4, 4, 4};
  try {
    kendall_tau_b(a, flat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefinedCorrelation);
  }
  EXPECT_THROW(kendall_tau_b(flat, a), Error);
}

TEST(Kendall, MatchesPairCountOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = series(rng, 2 + rng.below(80), trial % 2 == 0 ? 5 : 0);
    const auto y = series(rng, x.size(), trial % 3 == 0 ? 3 : 0);
    if (constant(x) || constant(y)) continue;
    const double t = kendall_tau_b(x, y);
    EXPECT_NEAR(t, oracle::kendall_naive(x, y), 1e-10);
    EXPECT_LE(std::abs(t), 1.0);
    EXPECT_NEAR(kendall_tau_b(y, x), t, 1e-14);
  }
}
