#pragma once

// Variational embedding, triplet likelihood, spike-and-slab prior and the
// objectives of the variational (VICE) and MAP/l1 (SPoSE) models.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "vice/dataset.hpp"
#include "vice/error.hpp"

namespace vice {

/// Row i holds the embedding of object i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

/// Mean-field Gaussian posterior q(X) = N(mu, diag(exp(log_sigma)^2)).
struct VariationalParams {
  Matrix mu;
  Matrix log_sigma;

  VariationalParams() = default;
  VariationalParams(Matrix mu_, Matrix log_sigma_) : mu(std::move(mu_)), log_sigma(std::move(log_sigma_)) {
    validate();
  }

  std::size_t num_objects() const noexcept { return static_cast<std::size_t>(mu.rows()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(mu.cols()); }
  Matrix sigma() const { return log_sigma.array().exp().matrix(); }

  void validate() const {
    if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols())
      throw ConfigError("mu and log_sigma shapes differ");
    if (mu.cols() < 1) throw ConfigError("embedding needs at least one dimension");
    if (!mu.allFinite() || !log_sigma.allFinite()) throw DivergenceError("non-finite variational parameters");
  }
};

/// Two-component zero-mean Gaussian mixture prior over every embedding entry.
struct SpikeSlabPrior {
  double pi_spike = 0.5;
  double sigma_spike = 0.25;
  double sigma_slab = 1.0;

  void validate() const {
    if (!(pi_spike > 0.0 && pi_spike < 1.0)) throw ConfigError("pi_spike must lie in (0, 1)");
    if (!(sigma_spike > 0.0)) throw ConfigError("sigma_spike must be positive");
    if (!(sigma_slab > 0.0)) throw ConfigError("sigma_slab must be positive");
    if (!(sigma_spike < sigma_slab)) throw ConfigError("sigma_spike must be strictly smaller than sigma_slab");
  }

  friend bool operator==(const SpikeSlabPrior&, const SpikeSlabPrior&) = default;
};

/// A reparameterized draw: `x` before rectification, `x_pos` = max(x, 0).
struct EmbeddingSample {
  Matrix x;
  Matrix x_pos;
};

/// Non-negative MAP embedding with l1 strength `lambda`.
struct SpoSEParams {
  Matrix x;
  double lambda = 0.0;
};

inline double log_sum_exp(double a, double b) noexcept {
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

inline double log_sum_exp(const std::array<double, 3>& v) noexcept {
  const double hi = std::max({v[0], v[1], v[2]});
  return hi + std::log(std::exp(v[0] - hi) + std::exp(v[1] - hi) + std::exp(v[2] - hi));
}

inline double gaussian_log_density(double x, double mean, double log_sd) noexcept {
  const double z = (x - mean) * std::exp(-log_sd);
  return -0.5 * z * z - log_sd - kLogSqrt2Pi;
}

/// x = mu + sigma * noise, x_pos = max(x, 0).
inline EmbeddingSample sample_embedding(const VariationalParams& params, const Matrix& noise) {
  if (noise.rows() != params.mu.rows() || noise.cols() != params.mu.cols())
    throw ConfigError("noise shape does not match parameters");
  EmbeddingSample s;
  s.x = params.mu.array() + params.log_sigma.array().exp() * noise.array();
  s.x_pos = s.x.cwiseMax(0.0);
  return s;
}

/// Pairwise similarities S_ab, S_ac, S_bc of a triplet in canonical order.
inline std::array<double, 3> pair_similarities(const Matrix& x_pos, const Triplet& t) {
  const auto a = x_pos.row(t[0]);
  const auto b = x_pos.row(t[1]);
  const auto c = x_pos.row(t[2]);
  return {a.dot(b), a.dot(c), b.dot(c)};
}

/// Softmax log-probabilities of choosing each pair, canonical order.
inline std::array<double, 3> pair_log_probs(const std::array<double, 3>& sims) noexcept {
  const double lse = log_sum_exp(sims);
  return {sims[0] - lse, sims[1] - lse, sims[2] - lse};
}

inline std::array<double, 3> pair_probs(const Matrix& x_pos, const Triplet& t) {
  const auto lp = pair_log_probs(pair_similarities(x_pos, t));
  return {std::exp(lp[0]), std::exp(lp[1]), std::exp(lp[2])};
}

/// log p({y,z} | {i,j,k}, X) for a non-negative embedding.
inline double triplet_log_prob(const Matrix& x_pos, const TripletRecord& record) {
  const auto n = static_cast<ObjectIndex>(x_pos.rows());
  if (record.first >= n || record.second >= n || record.odd >= n)
    throw DataError("triplet index out of range for embedding");
  const auto t = record.triplet();
  return pair_log_probs(pair_similarities(x_pos, t))[slot_index(t.slot_without(record.odd))];
}

/// Mean negative log-likelihood of the observed choices under `x_pos`.
inline double cross_entropy(const Matrix& x_pos, std::span<const TripletRecord> data) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& r : data) sum -= triplet_log_prob(x_pos, r);
  return sum / static_cast<double>(data.size());
}

/// log of the spike-and-slab mixture density at a single value.
inline double prior_log_density(double x, const SpikeSlabPrior& prior) noexcept {
  return log_sum_exp(std::log(prior.pi_spike) + gaussian_log_density(x, 0.0, std::log(prior.sigma_spike)),
                     std::log1p(-prior.pi_spike) + gaussian_log_density(x, 0.0, std::log(prior.sigma_slab)));
}

/// Sum over all entries of the spike-and-slab log density.
inline double prior_log_density(const Matrix& x, const SpikeSlabPrior& prior) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) sum += prior_log_density(x.data()[i], prior);
  return sum;
}

/// Sum over entries of log N(x_ij; mu_ij, sigma_ij^2).
inline double variational_log_density(const Matrix& x, const VariationalParams& params) {
  if (x.rows() != params.mu.rows() || x.cols() != params.mu.cols())
    throw ConfigError("sample shape does not match parameters");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    sum += gaussian_log_density(x.data()[i], params.mu.data()[i], params.log_sigma.data()[i]);
  return sum;
}

/// Mini-batch objective terms. `total` = `complexity` - `data`.
struct ObjectiveTerms {
  double total = 0.0;
  double data = 0.0;
  double complexity = 0.0;
};

/// Doubly stochastic objective with one posterior sample (fixed `noise`):
/// complexity = (log q(x) - log p(x)) / n at the unrectified sample,
/// data = mean log-likelihood of the batch under [x]_+.
inline ObjectiveTerms batch_objective(const VariationalParams& params, const SpikeSlabPrior& prior,
                                      std::span<const TripletRecord> batch, std::size_t n,
                                      const Matrix& noise) {
  if (batch.empty()) throw DataError("batch_objective: empty batch");
  if (n < batch.size()) throw ConfigError("batch_objective: n smaller than the batch");
  const auto s = sample_embedding(params, noise);
  ObjectiveTerms t;
  t.complexity = (variational_log_density(s.x, params) - prior_log_density(s.x, prior)) / static_cast<double>(n);
  for (const auto& r : batch) t.data += triplet_log_prob(s.x_pos, r);
  t.data /= static_cast<double>(batch.size());
  t.total = t.complexity - t.data;
  return t;
}

/// Negative log-likelihood plus lambda * sum(x); the constant n log C is dropped.
inline double spose_objective(const SpoSEParams& params, std::span<const TripletRecord> data) {
  if ((params.x.array() < 0.0).any()) throw ConfigError("spose_objective: negative embedding entry");
  double nll = 0.0;
  for (const auto& r : data) nll -= triplet_log_prob(params.x, r);
  return nll + params.lambda * params.x.sum();
}

inline double spose_objective(const SpoSEParams& params, const TripletDataset& data) {
  return spose_objective(params, std::span<const TripletRecord>(data.records()));
}

}  // namespace vice
