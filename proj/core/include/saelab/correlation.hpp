#pragma once

#include <span>

namespace saelab {

// Sample Pearson r. Throws kUndefinedCorrelation when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Kendall tau-b in O(n log n). Throws kUndefinedCorrelation when either
// series is entirely tied.
double kendall_tau_b(std::span<const double> x, std::span<const double> y);

}  // namespace saelab
