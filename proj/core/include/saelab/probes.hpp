#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "saelab/matrix.hpp"

namespace saelab::concepts {

// Baseline probes over per-query features (rows = queries, cols = neurons).
struct ProbeOptions {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  int iterations = 500;
  double learning_rate = 0.5;
};

// Picks the k features with the largest |mean difference| between classes on
// the training split, fits a logistic probe on them, and returns held-out
// accuracy.
double ksparse_probe(const Matrix<float>& features, const std::vector<bool>& labels,
                     std::size_t k, const ProbeOptions& options = {});

struct ProbeSweepRow {
  std::size_t k = 0;
  double accuracy = 0.0;
};

std::vector<ProbeSweepRow> ksparse_sweep(const Matrix<float>& features,
                                         const std::vector<bool>& labels,
                                         const std::vector<std::size_t>& ks,
                                         const ProbeOptions& options = {});

struct OneDProbeResult {
  double min_loss = 0.0;
  std::size_t best_feature = 0;
  std::vector<double> losses;  // per feature
};

// Fits scale + bias logistic regression on each feature alone and reports the
// minimum cross-entropy.
OneDProbeResult one_d_probe(const Matrix<float>& features, const std::vector<bool>& labels,
                            const ProbeOptions& options = {});

}  // namespace saelab::concepts
