#pragma once

// Analytic gradients of the mini-batch objective, Adam, the VICE and SPoSE
// training loops, and a central-difference gradient verifier.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <random>
#include <span>
#include <vector>

#include "vice/dataset.hpp"
#include "vice/error.hpp"
#include "vice/model.hpp"
#include "vice/pruning.hpp"

namespace vice {

struct ParamGradient {
  Matrix mu;
  Matrix log_sigma;
};

/// Gradient of the mean batch log-likelihood with respect to the
/// non-negative embedding `x_pos`. Rows of objects absent from the batch
/// are exactly zero.
inline Matrix data_term_gradient(const Matrix& x_pos, std::span<const TripletRecord> batch) {
  Matrix g = Matrix::Zero(x_pos.rows(), x_pos.cols());
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& r : batch) {
    const auto t = r.triplet();
    const auto chosen = slot_index(t.slot_without(r.odd));
    const auto lp = pair_log_probs(pair_similarities(x_pos, t));
    for (std::size_t p = 0; p < 3; ++p) {
      // d log p_chosen / d S_p = [p == chosen] - softmax_p
      const double coef = w * ((p == chosen ? 1.0 : 0.0) - std::exp(lp[p]));
      const auto pr = t.pair(static_cast<PairSlot>(p));
      g.row(pr[0]) += coef * x_pos.row(pr[1]);
      g.row(pr[1]) += coef * x_pos.row(pr[0]);
    }
  }
  return g;
}

/// Objective terms and their exact gradient with respect to mu and log
/// sigma at the given noise, in one pass. The rectifier's derivative at 0
/// is taken as 0.
inline std::pair<ObjectiveTerms, ParamGradient> value_and_grad(const VariationalParams& params,
                                                               const SpikeSlabPrior& prior,
                                                               std::span<const TripletRecord> batch, std::size_t n,
                                                               const Matrix& noise) {
  if (batch.empty()) throw DataError("value_and_grad: empty batch");
  if (n < batch.size()) throw ConfigError("value_and_grad: n smaller than the batch");
  const auto s = sample_embedding(params, noise);
  const auto rows = params.mu.rows();
  const auto cols = params.mu.cols();

  // data term and its gradient wrt x_pos
  ObjectiveTerms terms;
  Matrix g_data = Matrix::Zero(rows, cols);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& r : batch) {
    const auto t = r.triplet();
    const auto chosen = slot_index(t.slot_without(r.odd));
    const auto lp = pair_log_probs(pair_similarities(s.x_pos, t));
    terms.data += lp[chosen];
    for (std::size_t p = 0; p < 3; ++p) {
      const double coef = w * ((p == chosen ? 1.0 : 0.0) - std::exp(lp[p]));
      const auto pr = t.pair(static_cast<PairSlot>(p));
      g_data.row(pr[0]) += coef * s.x_pos.row(pr[1]);
      g_data.row(pr[1]) += coef * s.x_pos.row(pr[0]);
    }
  }
  terms.data *= w;

  const double inv_n = 1.0 / static_cast<double>(n);
  const double log_w_spike = std::log(prior.pi_spike) - std::log(prior.sigma_spike) - kLogSqrt2Pi;
  const double log_w_slab = std::log1p(-prior.pi_spike) - std::log(prior.sigma_slab) - kLogSqrt2Pi;
  const double prec_spike = 1.0 / (prior.sigma_spike * prior.sigma_spike);
  const double prec_slab = 1.0 / (prior.sigma_slab * prior.sigma_slab);

  ParamGradient g{Matrix(rows, cols), Matrix(rows, cols)};
  double log_q = 0.0;
  double log_p = 0.0;
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    const double x = s.x.data()[i];
    const double mu = params.mu.data()[i];
    const double ls = params.log_sigma.data()[i];
    const double sigma = std::exp(ls);
    const double inv_var = 1.0 / (sigma * sigma);
    const double z = (x - mu) / sigma;
    log_q += -0.5 * z * z - ls - kLogSqrt2Pi;

    const double a = log_w_spike - 0.5 * x * x * prec_spike;
    const double b = log_w_slab - 0.5 * x * x * prec_slab;
    const double lse = log_sum_exp(a, b);
    log_p += lse;
    const double r_spike = std::exp(a - lse);
    const double dlogp_dx = -x * (r_spike * prec_spike + (1.0 - r_spike) * prec_slab);

    // total derivative of L_total with respect to the sample entry
    const double g_x = inv_n * (-(x - mu) * inv_var - dlogp_dx) - (x > 0.0 ? g_data.data()[i] : 0.0);
    // chain through x = mu + sigma * eps, plus log q's explicit dependence on (mu, log sigma)
    g.mu.data()[i] = g_x + inv_n * (x - mu) * inv_var;
    g.log_sigma.data()[i] = g_x * sigma * noise.data()[i] + inv_n * (z * z - 1.0);
  }
  terms.complexity = inv_n * (log_q - log_p);
  terms.total = terms.complexity - terms.data;
  return {terms, std::move(g)};
}

/// Exact gradient of `batch_objective` with respect to mu and log sigma.
inline ParamGradient grad_batch_objective(const VariationalParams& params, const SpikeSlabPrior& prior,
                                          std::span<const TripletRecord> batch, std::size_t n,
                                          const Matrix& noise) {
  return value_and_grad(params, prior, batch, n, noise).second;
}

/// Central-difference estimate of the batch objective's gradient.
inline ParamGradient finite_difference_gradient(const VariationalParams& params, const SpikeSlabPrior& prior,
                                                std::span<const TripletRecord> batch, std::size_t n,
                                                const Matrix& noise, double step = 1e-5) {
  ParamGradient g{Matrix(params.mu.rows(), params.mu.cols()), Matrix(params.mu.rows(), params.mu.cols())};
  VariationalParams probe = params;
  const auto f = [&] { return batch_objective(probe, prior, batch, n, noise).total; };
  for (Eigen::Index i = 0; i < params.mu.size(); ++i) {
    double& m = probe.mu.data()[i];
    const double m0 = m;
    m = m0 + step;
    const double up = f();
    m = m0 - step;
    const double down = f();
    m = m0;
    g.mu.data()[i] = (up - down) / (2.0 * step);

    double& l = probe.log_sigma.data()[i];
    const double l0 = l;
    l = l0 + step;
    const double lup = f();
    l = l0 - step;
    const double ldown = f();
    l = l0;
    g.log_sigma.data()[i] = (lup - ldown) / (2.0 * step);
  }
  return g;
}

struct GradientCheck {
  double max_rel_error_mu = 0.0;
  double max_rel_error_log_sigma = 0.0;

  double worst() const noexcept { return std::max(max_rel_error_mu, max_rel_error_log_sigma); }
};

/// Entrywise |a - f| / max(|a|, |f|, floor), maximized over entries.
inline double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double f = numeric.data()[i];
    worst = std::max(worst, std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor}));
  }
  return worst;
}

/// Compares the analytic gradient against central differences.
inline GradientCheck check_gradient(const VariationalParams& params, const SpikeSlabPrior& prior,
                                    std::span<const TripletRecord> batch, std::size_t n, const Matrix& noise,
                                    double step = 1e-5) {
  const auto a = grad_batch_objective(params, prior, batch, n, noise);
  const auto f = finite_difference_gradient(params, prior, batch, n, noise, step);
  return {max_relative_error(a.mu, f.mu), max_relative_error(a.log_sigma, f.log_sigma)};
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

struct AdamMoments {
  Matrix first;
  Matrix second;
};

/// Moments for each parameter tensor, in the order the tensors are passed
/// to `adam_step`.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<AdamMoments> moments;
};

/// One bias-corrected Adam update over a set of tensors.
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!grads[k]->allFinite()) throw DivergenceError("adam_step: non-finite gradient in tensor " + std::to_string(k));
  }
  if (state.moments.empty()) {
    for (const Matrix* p : params)
      state.moments.push_back({Matrix::Zero(p->rows(), p->cols()), Matrix::Zero(p->rows(), p->cols())});
  }
  if (state.moments.size() != params.size()) throw ConfigError("adam_step: state does not match parameters");

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& mo = state.moments[k];
    const Matrix& g = *grads[k];
    mo.first = c.beta1 * mo.first + (1.0 - c.beta1) * g;
    mo.second = c.beta2 * mo.second + (1.0 - c.beta2) * g.cwiseProduct(g);
    params[k]->array() -= c.eta * (mo.first.array() / bc1) / ((mo.second.array() / bc2).sqrt() + c.eps_hat);
  }
}

inline void adam_step(VariationalParams& params, const ParamGradient& grads, AdamState& state) {
  Matrix* p[] = {&params.mu, &params.log_sigma};
  const Matrix* g[] = {&grads.mu, &grads.log_sigma};
  adam_step(p, g, state);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t max_epochs = 2000;
  std::uint64_t seed = 1;
  SpikeSlabPrior prior;
  std::size_t d_init = 100;
  std::size_t stability_window = 500;
  bool stop_on_convergence = true;
  std::size_t eval_every = 1;
  AdamConfig adam;
  PruningOptions pruning;
  double spose_mass_threshold = 0.5;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (stability_window < 1) throw ConfigError("stability_window must be at least 1");
    if (d_init < 1) throw ConfigError("d_init must be at least 1");
    if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (!(adam.eta >= 0.0)) throw ConfigError("learning rate must be non-negative");
    prior.validate();
  }
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double total = 0.0;
  double data_term = 0.0;
  double complexity_term = 0.0;
  double val_xent = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_dims_selected = 0;

  /// Field-wise equality; two missing (NaN) validation scores compare equal.
  friend bool operator==(const EpochLog& a, const EpochLog& b) {
    const bool xent_eq = a.val_xent == b.val_xent || (std::isnan(a.val_xent) && std::isnan(b.val_xent));
    return a.epoch == b.epoch && a.total == b.total && a.data_term == b.data_term &&
           a.complexity_term == b.complexity_term && xent_eq && a.n_dims_selected == b.n_dims_selected;
  }
};

struct TrainLog {
  double init_std = 0.0;        // std of the He-normal draw for mu
  double init_log_sigma = 0.0;  // -1 / sample std of mu
  std::optional<std::size_t> converged_epoch;
  std::uint64_t steps = 0;  // optimizer updates applied
  std::vector<EpochLog> epochs;
};

/// Raised when the objective or a gradient becomes non-finite. Carries the
/// parameters at the end of the last finite epoch.
template <typename Params>
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, Params last, TrainLog log)
      : DivergenceError(what), last_finite(std::move(last)), log(std::move(log)) {}
  Params last_finite;
  TrainLog log;
};

namespace detail {

inline Matrix normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = dist(rng);
  return out;
}

inline double sample_std(const Matrix& m) {
  const double n = static_cast<double>(m.size());
  const double mean = m.sum() / n;
  return std::sqrt((m.array() - mean).square().sum() / (n - 1.0));
}

}  // namespace detail

/// He-normal means (std sqrt(2 / d_init)) and constant log sigma = -1 / s_mu,
/// where s_mu is the sample standard deviation of the drawn means.
inline VariationalParams initialize_variational(std::size_t num_objects, std::size_t d_init, std::mt19937_64& rng,
                                                TrainLog* log = nullptr) {
  const double sd = std::sqrt(2.0 / static_cast<double>(d_init));
  Matrix mu = detail::normal_matrix(rng, static_cast<Eigen::Index>(num_objects), static_cast<Eigen::Index>(d_init), sd);
  const double s_mu = detail::sample_std(mu);
  const double ls = -1.0 / s_mu;
  if (log) {
    log->init_std = sd;
    log->init_log_sigma = ls;
  }
  Matrix log_sigma = Matrix::Constant(mu.rows(), mu.cols(), ls);
  return VariationalParams(std::move(mu), std::move(log_sigma));
}

/// Mini-batched VICE optimization with one posterior sample per step.
/// Stops after `max_epochs`, or earlier when the selected-dimension count
/// has been constant for `stability_window` epochs and `stop_on_convergence`.
inline std::pair<VariationalParams, TrainLog> train(const TripletDataset& data, const TripletDataset& val,
                                                    const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("train: empty training set");
  const std::size_t n = data.size();
  const std::size_t m = data.num_objects();

  std::mt19937_64 rng(cfg.seed);
  TrainLog log;
  VariationalParams params = initialize_variational(m, cfg.d_init, rng, &log);
  VariationalParams last_finite = params;
  AdamState adam{cfg.adam, 0, {}};
  StabilityTracker tracker(cfg.stability_window);

  std::vector<TripletRecord> order(data.records());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog e;
    e.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const TripletRecord> batch(order.data() + start, std::min(cfg.batch_size, n - start));
      const Matrix noise = detail::normal_matrix(rng, params.mu.rows(), params.mu.cols());
      const auto [terms, grads] = value_and_grad(params, cfg.prior, batch, n, noise);
      if (!std::isfinite(terms.total))
        throw TrainingDiverged<VariationalParams>("non-finite objective at epoch " + std::to_string(epoch),
                                                  last_finite, log);
      try {
        adam_step(params, grads, adam);
      } catch (const DivergenceError& err) {
        throw TrainingDiverged<VariationalParams>(err.what(), last_finite, log);
      }
      e.total += terms.total;
      e.data_term += terms.data;
      e.complexity_term += terms.complexity;
      ++batches;
    }
    e.total /= static_cast<double>(batches);
    e.data_term /= static_cast<double>(batches);
    e.complexity_term /= static_cast<double>(batches);
    if (!params.mu.allFinite() || !params.log_sigma.allFinite())
      throw TrainingDiverged<VariationalParams>("non-finite parameters at epoch " + std::to_string(epoch),
                                                last_finite, log);
    last_finite = params;

    if (epoch % cfg.eval_every == 0 && !val.empty())
      e.val_xent = cross_entropy(params.mu.cwiseMax(0.0), std::span<const TripletRecord>(val.records()));
    e.n_dims_selected = count_selected(select_dimensions(params, cfg.pruning));
    tracker.push(e.n_dims_selected);
    log.epochs.push_back(e);

    log.steps = adam.step;

    if (!log.converged_epoch && check_convergence(tracker)) {
      log.converged_epoch = epoch;
      if (cfg.stop_on_convergence) break;
    }
  }
  return {std::move(params), std::move(log)};
}

/// MAP training of the l1-penalized non-negative embedding. Each batch
/// minimizes mean NLL + (lambda / n) * sum(x), so a full epoch matches the
/// unnormalized objective up to the factor 1/n. Entries are projected onto
/// x >= 0 after every step.
inline std::pair<SpoSEParams, TrainLog> train_spose(const TripletDataset& data, const TripletDataset& val,
                                                    double lambda, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw DataError("train_spose: empty training set");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  const std::size_t n = data.size();
  const std::size_t m = data.num_objects();

  std::mt19937_64 rng(cfg.seed);
  TrainLog log;
  log.init_std = std::sqrt(2.0 / static_cast<double>(cfg.d_init));
  SpoSEParams params{detail::normal_matrix(rng, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(cfg.d_init),
                                           log.init_std)
                         .cwiseMax(0.0),
                     lambda};
  SpoSEParams last_finite = params;
  AdamState adam{cfg.adam, 0, {}};
  StabilityTracker tracker(cfg.stability_window);
  const double penalty = lambda / static_cast<double>(n);

  std::vector<TripletRecord> order(data.records());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog e;
    e.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const TripletRecord> batch(order.data() + start, std::min(cfg.batch_size, n - start));
      double data_term = 0.0;
      for (const auto& r : batch) data_term += triplet_log_prob(params.x, r);
      data_term /= static_cast<double>(batch.size());
      const double complexity = penalty * params.x.sum();
      if (!std::isfinite(data_term) || !std::isfinite(complexity))
        throw TrainingDiverged<SpoSEParams>("non-finite objective at epoch " + std::to_string(epoch), last_finite, log);

      Matrix grad = (-data_term_gradient(params.x, batch)).array() + penalty;
      Matrix* p[] = {&params.x};
      const Matrix* g[] = {&grad};
      try {
        adam_step(p, g, adam);
      } catch (const DivergenceError& err) {
        throw TrainingDiverged<SpoSEParams>(err.what(), last_finite, log);
      }
      params.x = params.x.cwiseMax(0.0);

      e.total += complexity - data_term;
      e.data_term += data_term;
      e.complexity_term += complexity;
      ++batches;
    }
    e.total /= static_cast<double>(batches);
    e.data_term /= static_cast<double>(batches);
    e.complexity_term /= static_cast<double>(batches);
    if (!params.x.allFinite())
      throw TrainingDiverged<SpoSEParams>("non-finite parameters at epoch " + std::to_string(epoch), last_finite, log);
    last_finite = params;

    if (epoch % cfg.eval_every == 0 && !val.empty())
      e.val_xent = cross_entropy(params.x, std::span<const TripletRecord>(val.records()));
    const auto sel = select_dimensions_by_mass(params.x, cfg.spose_mass_threshold);
    e.n_dims_selected =
        static_cast<std::size_t>(std::count_if(sel.begin(), sel.end(), [](const auto& s) { return s.selected; }));
    tracker.push(e.n_dims_selected);
    log.epochs.push_back(e);
    log.steps = adam.step;
    if (!log.converged_epoch && check_convergence(tracker)) log.converged_epoch = epoch;
  }
  return {std::move(params), std::move(log)};
}

}  // namespace vice
