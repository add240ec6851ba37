#include "saelab/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "saelab/error.hpp"
#include "saelab/rng.hpp"

namespace saelab {

SaeConfig SaeConfig::with_expansion(std::size_t input_dim, double expansion,
                                    std::size_t topk) {
  SaeConfig c;
  c.input_dim = input_dim;
  c.expansion_factor = expansion;
  c.latent_dim = static_cast<std::size_t>(
      std::llround(expansion * static_cast<double>(input_dim)));
  c.topk = topk;
  return c;
}

void SaeConfig::validate() const {
  require(input_dim > 0, "input_dim must be positive");
  require(latent_dim > 0, "latent_dim must be positive");
  require(topk <= latent_dim, "topk must not exceed latent_dim");
  if (expansion_factor > 0.0) {
    const auto expected = static_cast<std::size_t>(
        std::llround(expansion_factor * static_cast<double>(input_dim)));
    require(expected == latent_dim,
            "latent_dim must equal round(expansion_factor * input_dim)");
  }
  require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "learning_rate must be positive");
  require(epochs > 0, "epochs must be positive");
  require(batch_size > 0, "batch_size must be positive");
}

template <typename T>
BasicSaeParams<T>::BasicSaeParams(std::size_t input_dim, std::size_t latent_dim,
                                  bool tied)
    : w_enc_(input_dim, latent_dim),
      b_enc_(latent_dim, T{}),
      w_dec_(tied ? Matrix<T>() : Matrix<T>(latent_dim, input_dim)),
      b_dec_(input_dim, T{}),
      tied_(tied) {}

template <typename T>
Matrix<T> BasicSaeParams<T>::decoder_matrix() const {
  if (!tied_) return w_dec_;
  return w_enc_.transposed();
}

template <typename T>
bool BasicSaeParams<T>::all_finite() const {
  auto finite = [](const auto& range) {
    return std::all_of(range.begin(), range.end(),
                       [](T v) { return std::isfinite(v); });
  };
  return finite(w_enc_.storage()) && finite(b_enc_) &&
         finite(w_dec_.storage()) && finite(b_dec_);
}

template <typename T>
template <typename U>
BasicSaeParams<U> BasicSaeParams<T>::cast() const {
  BasicSaeParams<U> out;
  out.w_enc_ = w_enc_.template cast<U>();
  out.b_enc_.assign(b_enc_.begin(), b_enc_.end());
  out.w_dec_ = w_dec_.template cast<U>();
  out.b_dec_.assign(b_dec_.begin(), b_dec_.end());
  out.tied_ = tied_;
  return out;
}

template class BasicSaeParams<float>;
template class BasicSaeParams<double>;
template BasicSaeParams<double> BasicSaeParams<float>::cast<double>() const;
template BasicSaeParams<float> BasicSaeParams<double>::cast<float>() const;

template <typename T>
BasicLatent<T> BasicLatent<T>::from_dense(std::vector<T> values) {
  BasicLatent<T> h;
  h.values = std::move(values);
  for (std::size_t j = 0; j < h.values.size(); ++j) {
    if (h.values[j] != T{}) h.support.push_back(static_cast<std::uint32_t>(j));
  }
  return h;
}

template struct BasicLatent<float>;
template struct BasicLatent<double>;

SaeParams init_params(const SaeConfig& config) {
  config.validate();
  SaeParams p(config.input_dim, config.latent_dim, config.tied_weights);
  Rng rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
  for (auto& w : p.w_enc().storage()) {
    w = static_cast<float>(rng.uniform(-bound, bound));
  }
  if (!p.tied()) p.w_dec_storage() = p.w_enc().transposed();
  return p;
}

template <typename T>
std::vector<double> preactivations(std::span<const T> x,
                                   const BasicSaeParams<T>& params) {
  const std::size_t d_in = params.input_dim();
  const std::size_t latents = params.latent_dim();
  std::vector<double> p(latents);
  for (std::size_t j = 0; j < latents; ++j) p[j] = params.b_enc()[j];
  for (std::size_t d = 0; d < d_in; ++d) {
    const double xd = x[d];
    if (xd == 0.0) continue;
    const auto w = params.w_enc().row(d);
    for (std::size_t j = 0; j < latents; ++j) p[j] += xd * static_cast<double>(w[j]);
  }
  return p;
}

template std::vector<double> preactivations(std::span<const float>,
                                            const BasicSaeParams<float>&);
template std::vector<double> preactivations(std::span<const double>,
                                            const BasicSaeParams<double>&);

std::vector<std::uint32_t> topk_indices(std::span<const double> values,
                                        std::size_t k) {
  k = std::min(k, values.size());
  std::vector<std::uint32_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0U);
  if (k == 0) return {};
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  };
  if (k < idx.size()) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     idx.end(), before);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

template <typename T>
void check_input(std::span<const T> x, std::size_t dim) {
  if (x.size() != dim) {
    fail(ErrorCode::kInvalidInput, "input has dimension " +
                                       std::to_string(x.size()) + ", expected " +
                                       std::to_string(dim));
  }
  for (T v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidInput, "input is not finite");
  }
}

}  // namespace

template <typename T>
BasicLatent<T> encode(std::span<const T> x, const BasicSaeParams<T>& params,
                      std::size_t k) {
  check_input(x, params.input_dim());
  require(k <= params.latent_dim(), "k exceeds latent_dim");
  const auto p = preactivations(x, params);
  BasicLatent<T> h;
  h.values.assign(params.latent_dim(), T{});
  for (auto j : topk_indices(p, k)) {
    const T v = static_cast<T>(p[j]);
    if (v > T{}) {
      h.values[j] = v;
      h.support.push_back(j);
    }
  }
  return h;
}

template BasicLatent<float> encode(std::span<const float>,
                                   const BasicSaeParams<float>&, std::size_t);
template BasicLatent<double> encode(std::span<const double>,
                                    const BasicSaeParams<double>&, std::size_t);

template <typename T>
std::vector<T> decode(const BasicLatent<T>& h, const BasicSaeParams<T>& params) {
  if (h.values.size() != params.latent_dim()) {
    fail(ErrorCode::kInvalidInput, "latent has dimension " +
                                       std::to_string(h.values.size()) +
                                       ", expected " +
                                       std::to_string(params.latent_dim()));
  }
  const std::size_t d_in = params.input_dim();
  std::vector<double> acc(params.b_dec().begin(), params.b_dec().end());
  for (auto j : h.support) {
    if (j >= params.latent_dim()) fail(ErrorCode::kInvalidInput, "support index out of range");
    const double hj = h.values[j];
    if (params.tied()) {
      for (std::size_t d = 0; d < d_in; ++d) acc[d] += hj * params.w_enc()(d, j);
    } else {
      const auto row = params.w_dec_storage().row(j);
      for (std::size_t d = 0; d < d_in; ++d) acc[d] += hj * static_cast<double>(row[d]);
    }
  }
  return std::vector<T>(acc.begin(), acc.end());
}

template std::vector<float> decode(const BasicLatent<float>&,
                                   const BasicSaeParams<float>&);
template std::vector<double> decode(const BasicLatent<double>&,
                                    const BasicSaeParams<double>&);

template <typename T>
double BasicGradients<T>::squared_norm() const {
  double s = 0.0;
  for (double v : w_enc.storage()) s += v * v;
  for (double v : b_enc) s += v * v;
  for (double v : w_dec.storage()) s += v * v;
  for (double v : b_dec) s += v * v;
  return s;
}

template struct BasicGradients<float>;
template struct BasicGradients<double>;

template <typename T>
double loss_and_gradient(const BasicSaeParams<T>& params, const Matrix<T>& data,
                         std::span<const std::size_t> rows, std::size_t k,
                         std::span<const double> weights,
                         BasicGradients<T>* grads, std::vector<bool>* active) {
  const std::size_t d_in = params.input_dim();
  const std::size_t latents = params.latent_dim();
  require(data.cols() == d_in, "data dimension does not match the SAE");
  require(!rows.empty(), "empty batch");
  require(weights.empty() || weights.size() == data.rows(),
          "weights must cover every data row");
  const bool tied = params.tied();
  if (grads != nullptr) {
    grads->w_enc = Matrix<double>(d_in, latents, 0.0);
    grads->b_enc.assign(latents, 0.0);
    grads->w_dec = tied ? Matrix<double>() : Matrix<double>(latents, d_in, 0.0);
    grads->b_dec.assign(d_in, 0.0);
  }
  if (active != nullptr && active->size() != latents) active->assign(latents, false);

  const double inv_batch = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  std::vector<double> residual(d_in);
  std::vector<double> upstream(d_in);
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    const auto pre = preactivations(x, params);
    std::vector<std::uint32_t> live;
    for (auto j : topk_indices(pre, k)) {
      if (pre[j] > 0.0) live.push_back(j);
    }
    for (std::size_t d = 0; d < d_in; ++d) residual[d] = params.b_dec()[d];
    for (auto j : live) {
      for (std::size_t d = 0; d < d_in; ++d) residual[d] += pre[j] * params.dec(j, d);
    }
    double sq = 0.0;
    for (std::size_t d = 0; d < d_in; ++d) {
      residual[d] -= static_cast<double>(x[d]);
      sq += residual[d] * residual[d];
    }
    const double w = weights.empty() ? 1.0 : weights[r];
    total += w * sq;
    if (active != nullptr) {
      for (auto j : live) (*active)[j] = true;
    }
    if (grads == nullptr) continue;

    // d(loss)/d(xhat) = 2 w r / B
    const double scale = 2.0 * w * inv_batch;
    for (std::size_t d = 0; d < d_in; ++d) {
      upstream[d] = scale * residual[d];
      grads->b_dec[d] += upstream[d];
    }
    for (auto j : live) {
      double dh = 0.0;
      for (std::size_t d = 0; d < d_in; ++d) dh += params.dec(j, d) * upstream[d];
      grads->b_enc[j] += dh;
      for (std::size_t d = 0; d < d_in; ++d) {
        grads->w_enc(d, j) += static_cast<double>(x[d]) * dh;
        if (tied) {
          grads->w_enc(d, j) += pre[j] * upstream[d];
        } else {
          grads->w_dec(j, d) += pre[j] * upstream[d];
        }
      }
    }
  }
  return total * inv_batch;
}

template double loss_and_gradient(const BasicSaeParams<float>&, const Matrix<float>&,
                                  std::span<const std::size_t>, std::size_t,
                                  std::span<const double>, BasicGradients<float>*,
                                  std::vector<bool>*);
template double loss_and_gradient(const BasicSaeParams<double>&, const Matrix<double>&,
                                  std::span<const std::size_t>, std::size_t,
                                  std::span<const double>, BasicGradients<double>*,
                                  std::vector<bool>*);

namespace {

void apply_step(SaeParams& p, const BasicGradients<float>& g, double lr) {
  auto step = [lr](std::span<float> w, std::span<const double> grad) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<float>(static_cast<double>(w[i]) - lr * grad[i]);
    }
  };
  step(p.w_enc().flat(), g.w_enc.flat());
  step(p.b_enc(), g.b_enc);
  if (!p.tied()) step(p.w_dec_storage().flat(), g.w_dec.flat());
  step(p.b_dec(), g.b_dec);
}

double mean_decoder_norm(const SaeParams& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < p.latent_dim(); ++j) {
    double sq = 0.0;
    for (std::size_t d = 0; d < p.input_dim(); ++d) {
      const double v = p.dec(j, d);
      sq += v * v;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(p.latent_dim());
}

}  // namespace

TrainResult train(const Matrix<float>& data, const SaeConfig& config,
                  const TrainOptions& options) {
  config.validate();
  require(data.rows() > 0, "training data is empty");
  require(data.cols() == config.input_dim,
          "data dimension " + std::to_string(data.cols()) +
              " does not match input_dim " + std::to_string(config.input_dim));
  require(options.weights.empty() || options.weights.size() == data.rows(),
          "weights must cover every data row");

  TrainResult result;
  if (options.initial != nullptr) {
    result.params = *options.initial;
    require(result.params.input_dim() == config.input_dim &&
                result.params.latent_dim() == config.latent_dim &&
                result.params.tied() == config.tied_weights,
            "initial parameters do not match the config");
  } else {
    result.params = init_params(config);
  }
  SaeParams& params = result.params;

  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  BasicGradients<float> grads;
  std::vector<bool> active;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    active.assign(config.latent_dim, false);
    double loss_sum = 0.0;
    double last_grad_norm = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double loss = loss_and_gradient(params, data, batch, config.topk,
                                            options.weights, &grads, &active);
      if (!std::isfinite(loss)) {
        throw TrainingDivergedError(
            epoch, "training diverged at epoch " + std::to_string(epoch) +
                       ": loss is not finite");
      }
      loss_sum += loss * static_cast<double>(batch.size());
      last_grad_norm = std::sqrt(grads.squared_norm());
      apply_step(params, grads, config.learning_rate);
    }
    if (!params.all_finite()) {
      throw TrainingDivergedError(
          epoch, "training diverged at epoch " + std::to_string(epoch) +
                     ": parameters are not finite");
    }
    TrainStats stats;
    stats.epoch = epoch;
    stats.l2_loss = loss_sum / static_cast<double>(data.rows());
    stats.alive_count = static_cast<std::size_t>(
        std::count(active.begin(), active.end(), true));
    stats.grad_norm = last_grad_norm;
    stats.mean_decoder_norm = mean_decoder_norm(params);
    result.history.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats, params);
  }
  return result;
}

ReconstructionMetrics eval_reconstruction(const Matrix<float>& data,
                                          const SaeParams& params,
                                          std::size_t k) {
  require(data.rows() > 0, "evaluation data is empty");
  require(data.cols() == params.input_dim(), "data dimension does not match the SAE");
  std::vector<bool> alive(params.latent_dim(), false);
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.row(r);
    const auto h = encode(x, params, k);
    for (auto j : h.support) alive[j] = true;
    const auto xhat = decode(h, params);
    double sq = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = static_cast<double>(x[d]) - static_cast<double>(xhat[d]);
      sq += diff * diff;
    }
    total += sq;
  }
  ReconstructionMetrics m;
  m.l2 = total / static_cast<double>(data.rows());
  m.alive_count = static_cast<std::size_t>(std::count(alive.begin(), alive.end(), true));
  m.r_alive = static_cast<double>(m.alive_count) / static_cast<double>(params.latent_dim());
  return m;
}

double delta_ntp(std::span<const double> loss_original,
                 std::span<const double> loss_reconstructed) {
  require(!loss_original.empty(), "loss vectors must be nonempty");
  require(loss_original.size() == loss_reconstructed.size(),
          "loss vectors differ in length");
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < loss_original.size(); ++i) {
    require(std::isfinite(loss_original[i]) && std::isfinite(loss_reconstructed[i]),
            "loss values must be finite");
    a += loss_original[i];
    b += loss_reconstructed[i];
  }
  const double n = static_cast<double>(loss_original.size());
  return b / n - a / n;
}

Matrix<float> encode_rows(const Matrix<float>& data, const SaeParams& params,
                          std::size_t k) {
  require(data.cols() == params.input_dim(), "data dimension does not match the SAE");
  Matrix<float> out(data.rows(), params.latent_dim());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto h = encode(data.row(r), params, k);
    auto dst = out.row(r);
    for (auto j : h.support) dst[j] = h.values[j];
  }
  return out;
}

}  // namespace saelab
