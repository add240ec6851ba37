#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "saelab/matrix.hpp"

namespace saelab {

struct SaeConfig {
  std::size_t input_dim = 0;   // D
  std::size_t latent_dim = 0;  // L
  std::size_t topk = 0;        // k
  double expansion_factor = 0.0;
  std::uint64_t seed = 0;
  double learning_rate = 1e-2;
  int epochs = 1;
  bool tied_weights = false;
  std::size_t batch_size = 256;

  // Fills latent_dim from round(expansion * input_dim).
  static SaeConfig with_expansion(std::size_t input_dim, double expansion,
                                  std::size_t topk);

  // Throws kInvalidInput when an invariant is broken.
  void validate() const;
};

// TopK SAE weights. The encoder is stored D x L (column j is latent j's
// encoder direction). The decoder is L x D; with tied weights it is not
// stored and every decoder access reads or writes the encoder transpose.
template <typename T>
class BasicSaeParams {
 public:
  BasicSaeParams() = default;
  BasicSaeParams(std::size_t input_dim, std::size_t latent_dim, bool tied);

  std::size_t input_dim() const noexcept { return w_enc_.rows(); }
  std::size_t latent_dim() const noexcept { return w_enc_.cols(); }
  bool tied() const noexcept { return tied_; }

  Matrix<T>& w_enc() noexcept { return w_enc_; }
  const Matrix<T>& w_enc() const noexcept { return w_enc_; }
  std::vector<T>& b_enc() noexcept { return b_enc_; }
  const std::vector<T>& b_enc() const noexcept { return b_enc_; }
  std::vector<T>& b_dec() noexcept { return b_dec_; }
  const std::vector<T>& b_dec() const noexcept { return b_dec_; }

  // Untied decoder storage; empty when tied.
  Matrix<T>& w_dec_storage() noexcept { return w_dec_; }
  const Matrix<T>& w_dec_storage() const noexcept { return w_dec_; }

  // Decoder element (latent, dim).
  T& dec(std::size_t latent, std::size_t dim) {
    return tied_ ? w_enc_(dim, latent) : w_dec_(latent, dim);
  }
  T dec(std::size_t latent, std::size_t dim) const {
    return tied_ ? w_enc_(dim, latent) : w_dec_(latent, dim);
  }

  // Materialized L x D decoder (a copy, also when tied).
  Matrix<T> decoder_matrix() const;

  bool all_finite() const;

  template <typename U>
  BasicSaeParams<U> cast() const;

 private:
  template <typename U>
  friend class BasicSaeParams;

  Matrix<T> w_enc_;
  std::vector<T> b_enc_;
  Matrix<T> w_dec_;
  std::vector<T> b_dec_;
  bool tied_ = false;
};

using SaeParams = BasicSaeParams<float>;

// Sparse code: dense values plus the sorted indices of its nonzero entries.
template <typename T>
struct BasicLatent {
  std::vector<T> values;
  std::vector<std::uint32_t> support;

  static BasicLatent from_dense(std::vector<T> values);
};

using LatentVector = BasicLatent<float>;

// Initializes W_enc ~ U[-1/sqrt(D), 1/sqrt(D)], zero biases, W_dec = W_enc^T.
SaeParams init_params(const SaeConfig& config);

// Pre-activations W_enc^T x + b_enc accumulated in double.
template <typename T>
std::vector<double> preactivations(std::span<const T> x,
                                   const BasicSaeParams<T>& params);

// Indices of the k largest values, ties to the lowest index, ascending order.
std::vector<std::uint32_t> topk_indices(std::span<const double> values,
                                        std::size_t k);

// TopK of the pre-activations, then negatives clamped to zero.
template <typename T>
BasicLatent<T> encode(std::span<const T> x, const BasicSaeParams<T>& params,
                      std::size_t k);

// W_dec^T h + b_dec, touching only the support of h.
template <typename T>
std::vector<T> decode(const BasicLatent<T>& h, const BasicSaeParams<T>& params);

template <typename T>
struct BasicGradients {
  Matrix<double> w_enc;
  std::vector<double> b_enc;
  Matrix<double> w_dec;  // empty when tied; folded into w_enc
  std::vector<double> b_dec;

  double squared_norm() const;
};

// Mean over the selected rows of w_i * ||x_i - xhat_i||^2 and its gradient,
// with the TopK mask held fixed per row. `weights` may be empty (all ones).
// `active` (optional, size L) is set to true for latents that fired.
template <typename T>
double loss_and_gradient(const BasicSaeParams<T>& params, const Matrix<T>& data,
                         std::span<const std::size_t> rows, std::size_t k,
                         std::span<const double> weights,
                         BasicGradients<T>* grads,
                         std::vector<bool>* active = nullptr);

struct TrainStats {
  int epoch = 0;
  double l2_loss = 0.0;
  std::size_t alive_count = 0;
  double grad_norm = 0.0;
  double mean_decoder_norm = 0.0;
};

struct TrainOptions {
  // Per-row loss weights; empty means unweighted.
  std::span<const double> weights;
  // Invoked after every epoch with the current parameters.
  std::function<void(const TrainStats&, const SaeParams&)> on_epoch;
  // Starting point; when null, init_params(config) is used.
  const SaeParams* initial = nullptr;
};

struct TrainResult {
  SaeParams params;
  std::vector<TrainStats> history;
};

// Mini-batch gradient descent on the mean squared reconstruction error.
// Deterministic for a given config.seed.
TrainResult train(const Matrix<float>& data, const SaeConfig& config,
                  const TrainOptions& options = {});

struct ReconstructionMetrics {
  double l2 = 0.0;
  double r_alive = 0.0;
  std::size_t alive_count = 0;
};

ReconstructionMetrics eval_reconstruction(const Matrix<float>& data,
                                          const SaeParams& params,
                                          std::size_t k);

// mean(reconstructed) - mean(original).
double delta_ntp(std::span<const double> loss_original,
                 std::span<const double> loss_reconstructed);

// Encodes every row; returns the dense L-wide latent matrix.
Matrix<float> encode_rows(const Matrix<float>& data, const SaeParams& params,
                          std::size_t k);

}  // namespace saelab
