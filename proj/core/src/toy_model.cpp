#include "saelab/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "saelab/error.hpp"
#include "saelab/rng.hpp"

namespace saelab::toy {

void ToyConfig::validate() const {
  require(input_dim >= 1 && latent_dim >= 1 && samples_per_set >= 1,
          "toy dimensions and sample count must be positive");
  require(k_min <= k_max, "k_min must not exceed k_max");
  require(k_max <= latent_dim, "k_max must not exceed latent_dim");
  require(safety_coeff > 0.0, "safety_coeff must be positive");
  require(epochs > 0 && learning_rate > 0.0 && batch_size > 0,
          "invalid optimizer settings");
}

Matrix<float> ToyDataset::stacked() const {
  Matrix<float> out(safety.rows() + random.rows(), safety.cols());
  std::copy(safety.storage().begin(), safety.storage().end(), out.storage().begin());
  std::copy(random.storage().begin(), random.storage().end(),
            out.storage().begin() + static_cast<std::ptrdiff_t>(safety.size()));
  return out;
}

std::vector<double> ToyDataset::weights(double safety_coeff) const {
  std::vector<double> w(safety.rows() + random.rows(), 1.0);
  std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(safety.rows()), safety_coeff);
  return w;
}

namespace {

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm < 1e-12) {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (auto& x : v) x /= norm;
  return v;
}

double signed_scale(Rng& rng) {
  const double magnitude = rng.uniform(0.5, 2.0);
  return rng.coin() ? magnitude : -magnitude;
}

}  // namespace

ToyDataset gen_toy_data(const ToyConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, 0));
  const std::size_t dim = config.input_dim;
  const std::size_t n = config.samples_per_set;
  ToyDataset data;
  const auto vs = random_unit(rng, dim);
  data.safety_direction.assign(vs.begin(), vs.end());
  data.safety = Matrix<float>(n, dim);
  data.random = Matrix<float>(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = signed_scale(rng);
    data.safety_scales.push_back(a);
    for (std::size_t d = 0; d < dim; ++d) data.safety(i, d) = static_cast<float>(a * vs[d]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double c = signed_scale(rng);
    const auto vr = random_unit(rng, dim);
    data.random_scales.push_back(c);
    for (std::size_t d = 0; d < dim; ++d) data.random(j, d) = static_cast<float>(c * vr[d]);
  }
  return data;
}

TrainResult train_tied_sae(const ToyDataset& data, std::size_t latent_dim,
                           std::size_t k, double safety_coeff,
                           const ToyTrainSettings& settings) {
  require(data.safety.rows() + data.random.rows() > 0, "toy dataset is empty");
  require(safety_coeff > 0.0, "safety_coeff must be positive");
  SaeConfig config;
  config.input_dim = data.safety.cols();
  config.latent_dim = latent_dim;
  config.topk = k;
  config.tied_weights = true;
  config.seed = settings.seed;
  config.epochs = settings.epochs;
  config.learning_rate = settings.learning_rate;
  config.batch_size = settings.batch_size;
  const auto stacked = data.stacked();
  const auto weights = data.weights(safety_coeff);
  TrainOptions options;
  options.weights = weights;
  options.on_epoch = settings.on_epoch;
  return train(stacked, config, options);
}

Interference feature_interference(const Matrix<float>& w_dec) {
  const std::size_t latents = w_dec.rows();
  Interference out;
  out.gram = Matrix<double>(latents, latents, 0.0);
  std::vector<double> norms(latents, 0.0);
  for (std::size_t j = 0; j < latents; ++j) {
    double sq = 0.0;
    for (float v : w_dec.row(j)) sq += static_cast<double>(v) * v;
    norms[j] = std::sqrt(sq);
    if (norms[j] == 0.0) out.zero_rows.push_back(j);
  }
  require(out.zero_rows.size() < latents, "all decoder rows are zero");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < latents; ++a) {
    if (norms[a] == 0.0) continue;
    out.gram(a, a) = 1.0;
    for (std::size_t b = a + 1; b < latents; ++b) {
      if (norms[b] == 0.0) continue;
      double dot = 0.0;
      const auto ra = w_dec.row(a);
      const auto rb = w_dec.row(b);
      for (std::size_t d = 0; d < w_dec.cols(); ++d) {
        dot += static_cast<double>(ra[d]) * rb[d];
      }
      const double c = std::min(1.0, std::abs(dot) / (norms[a] * norms[b]));
      out.gram(a, b) = c;
      out.gram(b, a) = c;
      sum += c;
      out.max = std::max(out.max, c);
      ++pairs;
    }
  }
  out.avg = pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
  return out;
}

Distinguishable distinguishable_count(const SaeParams& params,
                                      const ToyDataset& data, std::size_t k) {
  const std::size_t latents = params.latent_dim();
  Distinguishable out;
  out.safety_active.assign(latents, false);
  out.random_active.assign(latents, false);
  auto scan = [&](const Matrix<float>& rows, std::vector<bool>& flags) {
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      for (auto j : encode(rows.row(r), params, k).support) flags[j] = true;
    }
  };
  scan(data.safety, out.safety_active);
  scan(data.random, out.random_active);
  for (std::size_t j = 0; j < latents; ++j) {
    const bool s = out.safety_active[j];
    const bool r = out.random_active[j];
    if (s != r) ++out.g;
    if (s && !r) ++out.safety_only;
    if (r && !s) ++out.random_only;
  }
  return out;
}

SweepResult sweep(const ToyConfig& config, const GramSink& gram_sink) {
  config.validate();
  const auto data = gen_toy_data(config);
  SweepResult result;
  for (std::size_t k = config.k_min; k <= config.k_max; ++k) {
    ToyTrainSettings settings;
    settings.epochs = config.epochs;
    settings.learning_rate = config.learning_rate;
    settings.batch_size = config.batch_size;
    settings.seed = derive_seed(config.seed, 1000 + k);
    TrainResult trained;
    try {
      trained = train_tied_sae(data, config.latent_dim, k, config.safety_coeff, settings);
    } catch (const TrainingDivergedError& e) {
      throw TrainingDivergedError(e.epoch(), std::string(e.what()) + " (k=" +
                                                 std::to_string(k) + ")");
    }
    const auto interference = feature_interference(trained.params.decoder_matrix());
    const auto dist = distinguishable_count(trained.params, data, k);
    SweepRow row;
    row.k = k;
    row.g = dist.g;
    row.safety_only = dist.safety_only;
    row.interference_avg = interference.avg;
    row.interference_max = interference.max;
    row.final_loss = trained.history.back().l2_loss;
    result.rows.push_back(row);
    if (gram_sink) gram_sink(k, interference);
  }
  auto best_g = result.rows.begin();
  auto best_i = result.rows.begin();
  for (auto it = result.rows.begin(); it != result.rows.end(); ++it) {
    if (it->g > best_g->g) best_g = it;
    if (it->interference_avg < best_i->interference_avg) best_i = it;
  }
  result.argmax_g_k = best_g->k;
  result.argmin_interference_k = best_i->k;
  return result;
}

}  // namespace saelab::toy
