#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "saelab/matrix.hpp"
#include "saelab/sae.hpp"

namespace saelab::toy {

// Synthetic safety-subspace experiment: one fixed "safety" direction scaled by
// nonzero scalars versus vectors along fresh random directions, reconstructed
// by tied-weight TopK SAEs at varying sparsity.
struct ToyConfig {
  std::size_t input_dim = 20;
  std::size_t latent_dim = 40;
  std::size_t samples_per_set = 256;
  std::size_t k_min = 1;
  std::size_t k_max = 20;
  double safety_coeff = 0.1;
  std::uint64_t seed = 0;
  // Optimizer settings for each per-k training run.
  int epochs = 300;
  double learning_rate = 0.05;
  std::size_t batch_size = 64;

  void validate() const;
};

struct ToyDataset {
  std::vector<float> safety_direction;  // unit norm
  std::vector<double> safety_scales;    // a_i, never zero
  std::vector<double> random_scales;    // c_j
  Matrix<float> safety;                 // rows a_i * v_s
  Matrix<float> random;                 // rows c_j * v_r,j

  // Safety rows followed by random rows.
  Matrix<float> stacked() const;
  // Loss weights aligned with stacked(): safety_coeff for safety rows, 1 otherwise.
  std::vector<double> weights(double safety_coeff) const;
};

ToyDataset gen_toy_data(const ToyConfig& config);

struct ToyTrainSettings {
  int epochs = 300;
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::function<void(const TrainStats&, const SaeParams&)> on_epoch;
};

// Tied-weight SAE trained with safety rows weighted by safety_coeff.
TrainResult train_tied_sae(const ToyDataset& data, std::size_t latent_dim,
                           std::size_t k, double safety_coeff,
                           const ToyTrainSettings& settings);

struct Interference {
  double avg = 0.0;
  double max = 0.0;
  Matrix<double> gram;                  // |cosine| between decoder rows, L x L
  std::vector<std::size_t> zero_rows;   // excluded from avg/max
};

// Pairwise |cosine| of decoder rows (rows are latents).
Interference feature_interference(const Matrix<float>& w_dec);

struct Distinguishable {
  std::size_t g = 0;             // sum over latents of X_s XOR X_r
  std::size_t safety_only = 0;   // active on safety rows only
  std::size_t random_only = 0;   // active on random rows only
  std::vector<bool> safety_active;
  std::vector<bool> random_active;
};

Distinguishable distinguishable_count(const SaeParams& params,
                                      const ToyDataset& data, std::size_t k);

struct SweepRow {
  std::size_t k = 0;
  std::size_t g = 0;
  std::size_t safety_only = 0;
  double interference_avg = 0.0;
  double interference_max = 0.0;
  double final_loss = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t argmax_g_k = 0;             // ties toward smaller k
  std::size_t argmin_interference_k = 0;  // on interference_avg, ties toward smaller k
};

using GramSink = std::function<void(std::size_t k, const Interference&)>;

// One tied SAE per k in [k_min, k_max], each with its own seed-derived init.
SweepResult sweep(const ToyConfig& config, const GramSink& gram_sink = {});

}  // namespace saelab::toy
