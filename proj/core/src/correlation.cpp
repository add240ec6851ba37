#include "saelab/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "saelab/error.hpp"

namespace saelab {

namespace {

void check_series(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "correlation series differ in length");
  require(x.size() >= 2, "correlation needs at least two points");
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(std::isfinite(x[i]) && std::isfinite(y[i]),
            "correlation series contain non-finite values");
  }
}

// Number of pairs tied within runs of equal values in a sorted range.
template <typename It, typename Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t total = 0;
  while (first != last) {
    auto run_end = first + 1;
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    const auto t = static_cast<std::uint64_t>(run_end - first);
    total += t * (t - 1) / 2;
    first = run_end;
  }
  return total;
}

// Sorts v ascending and returns the number of inversions removed.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf,
                          std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t out = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[out++] = v[j++];
    } else {
      buf[out++] = v[i++];
    }
  }
  while (i < mid) buf[out++] = v[i++];
  while (j < hi) buf[out++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_series(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail(ErrorCode::kUndefinedCorrelation, "correlation undefined for a constant series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_series(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tied_pairs(order.begin(), order.end(),
                                      [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const std::uint64_t n3 = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] == x[b] && y[a] == y[b];
  });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> buf(n);
  const std::uint64_t swaps = merge_count(ys, buf, 0, n);
  const std::uint64_t n2 = tied_pairs(ys.begin(), ys.end(),
                                      [](double a, double b) { return a == b; });
  if (n1 == n0 || n2 == n0) {
    fail(ErrorCode::kUndefinedCorrelation, "kendall tau undefined for an all-tied series");
  }
  const double numer = static_cast<double>(n0) - static_cast<double>(n1) -
                       static_cast<double>(n2) + static_cast<double>(n3) -
                       2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                       std::sqrt(static_cast<double>(n0 - n2));
  return std::clamp(numer / denom, -1.0, 1.0);
}

}  // namespace saelab
