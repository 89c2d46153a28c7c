#pragma once

// Posterior predictive estimates, accuracy/KL scoring, cross-run
// reproducibility, paired t-tests and top-k dimension reports.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vice/dataset.hpp"
#include "vice/error.hpp"
#include "vice/model.hpp"
#include "vice/pruning.hpp"

namespace vice {

/// Choice probabilities over the three pairs of a triplet, canonical order.
struct PredictiveDistribution {
  Triplet triplet;
  std::array<double, 3> probabilities{};
};

/// Monte Carlo posterior predictive: averages the choice probabilities of R
/// rectified samples from q. All triplets are scored against the same R
/// samples, drawn once under `seed`.
class MonteCarloPredictor {
 public:
  MonteCarloPredictor(const VariationalParams& params, std::size_t samples, std::uint64_t seed) {
    if (samples < 1) throw ConfigError("number of Monte Carlo samples must be at least 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Matrix sigma = params.sigma();
    draws_.reserve(samples);
    for (std::size_t r = 0; r < samples; ++r) {
      Matrix x(params.mu.rows(), params.mu.cols());
      for (Eigen::Index i = 0; i < x.size(); ++i)
        x.data()[i] = std::max(0.0, params.mu.data()[i] + sigma.data()[i] * normal(rng));
      draws_.push_back(std::move(x));
    }
  }

  PredictiveDistribution predict(const Triplet& t) const {
    PredictiveDistribution out{t, {0.0, 0.0, 0.0}};
    for (const auto& x : draws_) {
      const auto p = pair_probs(x, t);
      for (std::size_t k = 0; k < 3; ++k) out.probabilities[k] += p[k];
    }
    const double total = out.probabilities[0] + out.probabilities[1] + out.probabilities[2];
    for (auto& p : out.probabilities) p /= total;
    return out;
  }

  std::size_t samples() const noexcept { return draws_.size(); }

 private:
  std::vector<Matrix> draws_;
};

inline PredictiveDistribution predict_mc(const VariationalParams& params, const Triplet& t, std::size_t samples,
                                         std::uint64_t seed) {
  return MonteCarloPredictor(params, samples, seed).predict(t);
}

/// Deterministic choice probabilities of a fixed non-negative embedding.
inline PredictiveDistribution predict_deterministic(const Matrix& x_pos, const Triplet& t) {
  return {t, pair_probs(x_pos, t)};
}

/// Index of the largest entry; ties go to the earliest slot.
inline PairSlot argmax_slot(const std::array<double, 3>& v) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < 3; ++k)
    if (v[k] > v[best]) best = k;
  return static_cast<PairSlot>(best);
}

/// Most probable pair under a fixed embedding. Similarities are compared
/// directly, so exact ties resolve in canonical order.
inline PairSlot predict_map(const Matrix& x, const Triplet& t) { return argmax_slot(pair_similarities(x, t)); }

/// Fraction of records whose chosen pair equals the prediction.
inline double accuracy(const std::vector<PairSlot>& predictions, const TripletDataset& data) {
  if (predictions.size() != data.size()) throw DataError("accuracy: prediction count does not match dataset");
  if (data.empty()) throw DataError("accuracy: empty dataset");
  std::size_t hits = 0;
  for (std::size_t s = 0; s < data.size(); ++s)
    if (predictions[s] == data[s].chosen()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

inline std::vector<PairSlot> predict_all(const Matrix& x, const TripletDataset& data) {
  std::vector<PairSlot> out;
  out.reserve(data.size());
  for (const auto& r : data.records()) out.push_back(predict_map(x, r.triplet()));
  return out;
}

inline std::vector<PairSlot> predict_all(const MonteCarloPredictor& model, const TripletDataset& data) {
  std::vector<PairSlot> out;
  out.reserve(data.size());
  for (const auto& r : data.records()) out.push_back(argmax_slot(model.predict(r.triplet()).probabilities));
  return out;
}

enum class KlDirection { kHumanToModel, kModelToHuman };

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over triplets of KL(human || model) (or the reverse). 0 log 0 = 0;
/// the denominator distribution is floored at 1e-12.
inline double mean_kl(const std::vector<PredictiveDistribution>& model, const std::vector<ResponseDistribution>& human,
                      KlDirection direction = KlDirection::kHumanToModel) {
  if (model.size() != human.size() || model.empty()) throw DataError("mean_kl: unmatched distribution sets");
  double sum = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (!(model[i].triplet == human[i].triplet)) throw DataError("mean_kl: unmatched triplet at position " + std::to_string(i));
    const auto& p = direction == KlDirection::kHumanToModel ? human[i].probabilities : model[i].probabilities;
    const auto& q = direction == KlDirection::kHumanToModel ? model[i].probabilities : human[i].probabilities;
    for (std::size_t k = 0; k < 3; ++k)
      if (p[k] > 0.0) sum += p[k] * std::log(p[k] / std::max(q[k], kProbabilityFloor));
  }
  return sum / static_cast<double>(model.size());
}

/// Pearson correlation; 0 when either input has zero variance.
inline double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::VectorXd ca = a.array() - ma;
  const Eigen::VectorXd cb = b.array() - mb;
  const double va = ca.squaredNorm();
  const double vb = cb.squaredNorm();
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return ca.dot(cb) / std::sqrt(va * vb);
}

struct ReproducibilityReport {
  std::vector<double> per_run_scores;  // fraction of dims whose averaged best match exceeds the threshold
  double mean_score = 0.0;
  double mean_dims = 0.0;
  double sd_dims = 0.0;
};

/// Each dimension of each run is matched to its most correlated dimension
/// in every other run (not one-to-one); the best-match correlations are
/// averaged over the other runs and compared with `threshold`.
inline ReproducibilityReport reproducibility(const std::vector<PrunedEmbedding>& runs, double threshold = 0.8) {
  if (runs.size() < 2) throw DataError("reproducibility needs at least two runs");
  const auto m = runs.front().mu_selected.rows();
  for (const auto& r : runs)
    if (r.mu_selected.rows() != m) throw DataError("reproducibility: runs cover different object sets");

  ReproducibilityReport rep;
  for (std::size_t a = 0; a < runs.size(); ++a) {
    const auto& A = runs[a].mu_selected;
    std::size_t hits = 0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      double avg = 0.0;
      for (std::size_t b = 0; b < runs.size(); ++b) {
        if (b == a) continue;
        const auto& B = runs[b].mu_selected;
        double best = 0.0;
        for (Eigen::Index k = 0; k < B.cols(); ++k)
          best = std::max(best, pearson(A.col(j), B.col(k)));
        avg += best;
      }
      avg /= static_cast<double>(runs.size() - 1);
      if (avg > threshold) ++hits;
    }
    rep.per_run_scores.push_back(A.cols() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(A.cols()));
  }
  const double k = static_cast<double>(runs.size());
  rep.mean_score = std::accumulate(rep.per_run_scores.begin(), rep.per_run_scores.end(), 0.0) / k;
  for (const auto& r : runs) rep.mean_dims += static_cast<double>(r.dims());
  rep.mean_dims /= k;
  for (const auto& r : runs) rep.sd_dims += std::pow(static_cast<double>(r.dims()) - rep.mean_dims, 2);
  rep.sd_dims = std::sqrt(rep.sd_dims / (k - 1.0));
  return rep;
}

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;       // two-sided
  double p_less = 0.5;        // one-sided, H1: mean(a - b) < 0
  std::size_t df = 0;
};

/// Two-sided paired t-test on a - b.
inline TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DataError("paired_ttest: need two equal-length samples of size >= 2");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);
  TTestResult res;
  res.df = n - 1;
  if (var == 0.0) {
    if (mean == 0.0) return res;  // identical samples
    throw DataError("paired_ttest: differences have zero variance");
  }
  res.t_statistic = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(res.df));
  res.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t_statistic))));
  res.p_less = boost::math::cdf(dist, res.t_statistic);
  return res;
}

struct TopKEntry {
  std::size_t dim_index = 0;  // original dimension
  std::vector<std::string> labels;
};

/// For each kept dimension, the labels of the k objects with the largest
/// mean weight (descending, ties by lower object index).
inline std::vector<TopKEntry> topk_report(const PrunedEmbedding& pruned, const std::vector<std::string>& labels,
                                          std::size_t k = 6) {
  const auto m = static_cast<std::size_t>(pruned.mu_selected.rows());
  if (labels.size() != m) throw DataError("topk_report: need one label per object");
  k = std::min(k, m);
  std::vector<TopKEntry> out;
  std::vector<std::size_t> order(m);
  for (std::size_t c = 0; c < pruned.dims(); ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto col = pruned.mu_selected.col(static_cast<Eigen::Index>(c));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return col(static_cast<Eigen::Index>(a)) > col(static_cast<Eigen::Index>(b));
    });
    TopKEntry e{pruned.kept_dims[c], {}};
    for (std::size_t i = 0; i < k; ++i) e.labels.push_back(labels[order[i]]);
    out.push_back(std::move(e));
  }
  return out;
}

/// Position of the lower median of `values`; ties by lower position.
inline std::size_t median_index(const std::vector<double>& values) {
  if (values.empty()) throw DataError("median_index: empty input");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return order[(values.size() - 1) / 2];
}

}  // namespace vice
