#include "saelab/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saelab/error.hpp"
#include "saelab/rng.hpp"

namespace saelab::concepts {

namespace {

void check_labels(const Matrix<float>& features, const std::vector<bool>& labels) {
  require(features.rows() == labels.size(), "labels do not match feature rows");
  const auto positives = std::count(labels.begin(), labels.end(), true);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
    fail(ErrorCode::kInvalidInput, "probe labels contain a single class");
  }
}

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) {
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

Standardizer fit_standardizer(const Matrix<float>& x, const std::vector<std::size_t>& rows,
                              const std::vector<std::size_t>& cols) {
  Standardizer s;
  for (auto c : cols) {
    double m = 0.0;
    for (auto r : rows) m += x(r, c);
    m /= static_cast<double>(rows.size());
    double v = 0.0;
    for (auto r : rows) v += (x(r, c) - m) * (x(r, c) - m);
    v /= static_cast<double>(rows.size());
    s.mean.push_back(m);
    s.scale.push_back(v > 0 ? 1.0 / std::sqrt(v) : 1.0);
  }
  return s;
}

struct Logistic {
  std::vector<double> w;
  double b = 0.0;
};

// Full-batch gradient descent on mean cross-entropy.
Logistic fit_logistic(const Matrix<float>& x, const std::vector<bool>& y,
                      const std::vector<std::size_t>& rows,
                      const std::vector<std::size_t>& cols, const Standardizer& st,
                      const ProbeOptions& opt) {
  Logistic model;
  model.w.assign(cols.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  std::vector<double> gw(cols.size());
  std::vector<double> z(cols.size());
  for (int it = 0; it < opt.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (auto r : rows) {
      double logit = model.b;
      for (std::size_t i = 0; i < cols.size(); ++i) {
        z[i] = (x(r, cols[i]) - st.mean[i]) * st.scale[i];
        logit += model.w[i] * z[i];
      }
      const double err = sigmoid(logit) - (y[r] ? 1.0 : 0.0);
      for (std::size_t i = 0; i < cols.size(); ++i) gw[i] += err * z[i];
      gb += err;
    }
    for (std::size_t i = 0; i < cols.size(); ++i) model.w[i] -= opt.learning_rate * gw[i] * inv_n;
    model.b -= opt.learning_rate * gb * inv_n;
  }
  return model;
}

double logit_of(const Logistic& m, const Matrix<float>& x, std::size_t r,
                const std::vector<std::size_t>& cols, const Standardizer& st) {
  double logit = m.b;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    logit += m.w[i] * (x(r, cols[i]) - st.mean[i]) * st.scale[i];
  }
  return logit;
}

}  // namespace

double ksparse_probe(const Matrix<float>& features, const std::vector<bool>& labels,
                     std::size_t k, const ProbeOptions& options) {
  check_labels(features, labels);
  require(k >= 1 && k <= features.cols(), "k must be in [1, feature count]");
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(
      std::floor(options.train_fraction * static_cast<double>(order.size())));
  require(n_train > 0 && n_train < order.size(), "split leaves an empty partition");
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  const auto train_pos = std::count_if(train.begin(), train.end(), [&](auto r) { return labels[r]; });
  if (train_pos == 0 || train_pos == static_cast<std::ptrdiff_t>(train.size())) {
    fail(ErrorCode::kInvalidInput, "training split contains a single class");
  }

  std::vector<double> diff(features.cols());
  for (std::size_t c = 0; c < features.cols(); ++c) {
    double s1 = 0.0, s0 = 0.0;
    for (auto r : train) (labels[r] ? s1 : s0) += features(r, c);
    diff[c] = std::abs(s1 / static_cast<double>(train_pos) -
                       s0 / static_cast<double>(train.size() - train_pos));
  }
  std::vector<std::size_t> cols(features.cols());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  std::stable_sort(cols.begin(), cols.end(), [&](auto a, auto b) { return diff[a] > diff[b]; });
  cols.resize(k);

  const auto st = fit_standardizer(features, train, cols);
  const auto model = fit_logistic(features, labels, train, cols, st, options);
  std::size_t correct = 0;
  for (auto r : test) {
    const bool pred = logit_of(model, features, r, cols, st) >= 0.0;
    correct += pred == labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<ProbeSweepRow> ksparse_sweep(const Matrix<float>& features,
                                         const std::vector<bool>& labels,
                                         const std::vector<std::size_t>& ks,
                                         const ProbeOptions& options) {
  std::vector<ProbeSweepRow> rows;
  for (auto k : ks) {
    rows.push_back({k, ksparse_probe(features, labels, std::min(k, features.cols()), options)});
  }
  return rows;
}

OneDProbeResult one_d_probe(const Matrix<float>& features, const std::vector<bool>& labels,
                            const ProbeOptions& options) {
  check_labels(features, labels);
  require(features.cols() > 0, "no features");
  std::vector<std::size_t> rows(features.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  OneDProbeResult out;
  out.min_loss = INFINITY;
  for (std::size_t c = 0; c < features.cols(); ++c) {
    const std::vector<std::size_t> cols{c};
    const auto st = fit_standardizer(features, rows, cols);
    const auto model = fit_logistic(features, labels, rows, cols, st, options);
    double loss = 0.0;
    for (auto r : rows) {
      const double z = logit_of(model, features, r, cols, st);
      loss += softplus_neg(labels[r] ? z : -z);
    }
    loss /= static_cast<double>(rows.size());
    out.losses.push_back(loss);
    if (loss < out.min_loss) {
      out.min_loss = loss;
      out.best_feature = c;
    }
  }
  return out;
}

}  // namespace saelab::concepts
