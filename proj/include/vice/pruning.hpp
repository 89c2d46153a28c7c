#pragma once

// Dimension importance from posterior zero-probabilities, Benjamini-Hochberg
// FDR control, pruning, and the representational-stability stopping rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "vice/error.hpp"
#include "vice/model.hpp"

namespace vice {

/// P(X_ij <= 0) under N(mu, sigma^2), i.e. Phi(-mu / sigma).
inline double zero_probability(double mu, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("zero_probability: sigma must be positive");
  return 0.5 * std::erfc(mu / (sigma * std::numbers::sqrt2));
}

/// Same as `zero_probability` but parameterized by log sigma, so entries
/// whose scale underflows to 0 resolve to the limiting value.
inline double zero_probability_log_scale(double mu, double log_sigma) noexcept {
  const double z = mu == 0.0 ? 0.0 : mu * std::exp(-log_sigma);
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

struct PruningOptions {
  double alpha = 0.05;              // FDR level
  int reliability_threshold = 5;    // keep dimensions with more significant objects than this
  double posterior_level = 0.95;    // require P(X_ij > 0) >= this among BH rejections
  bool bh_only = false;             // skip the posterior filter (sensitivity analysis)
};

/// Benjamini-Hochberg rejections at level `alpha`; returns a mask.
inline std::vector<bool> benjamini_hochberg(const std::vector<double>& p_values, double alpha) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::size_t k = 0;
  for (std::size_t i = m; i >= 1; --i) {
    if (p_values[order[i - 1]] <= static_cast<double>(i) * alpha / static_cast<double>(m)) {
      k = i;
      break;
    }
  }
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < k; ++i) reject[order[i]] = true;
  return reject;
}

/// Objects in one dimension that are BH-significant at `alpha` and, unless
/// `bh_only`, also have P(X > 0) >= `posterior_level`.
inline int significant_object_count(const std::vector<double>& p_values, double alpha,
                                    double posterior_level = 0.95, bool bh_only = false) {
  const auto reject = benjamini_hochberg(p_values, alpha);
  const double p_max = 1.0 - posterior_level;
  int count = 0;
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    if (reject[i] && (bh_only || p_values[i] <= p_max)) ++count;
  }
  return count;
}

struct DimensionImportance {
  std::size_t dim_index = 0;
  int significant_objects = 0;
  bool selected = false;
};

/// Scores every dimension; sorted by count descending, ties by lower index.
inline std::vector<DimensionImportance> select_dimensions(const VariationalParams& params,
                                                          const PruningOptions& opt = {}) {
  const auto m = params.mu.rows();
  const auto d = params.mu.cols();
  std::vector<DimensionImportance> out;
  out.reserve(static_cast<std::size_t>(d));
  std::vector<double> p(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < m; ++i)
      p[static_cast<std::size_t>(i)] = zero_probability_log_scale(params.mu(i, j), params.log_sigma(i, j));
    const int c = significant_object_count(p, opt.alpha, opt.posterior_level, opt.bh_only);
    out.push_back({static_cast<std::size_t>(j), c, c > opt.reliability_threshold});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.significant_objects > b.significant_objects;
  });
  return out;
}

inline std::size_t count_selected(const std::vector<DimensionImportance>& sel) {
  return static_cast<std::size_t>(std::count_if(sel.begin(), sel.end(), [](const auto& s) { return s.selected; }));
}

struct PrunedEmbedding {
  Matrix mu_selected;     // m x d'
  Matrix sigma_selected;  // m x d'
  std::vector<std::size_t> kept_dims;

  std::size_t dims() const noexcept { return kept_dims.size(); }
};

/// Copies the selected columns in selection order. An empty selection
/// yields an m x 0 embedding.
inline PrunedEmbedding prune(const VariationalParams& params, const std::vector<DimensionImportance>& selection) {
  PrunedEmbedding out;
  for (const auto& s : selection)
    if (s.selected) out.kept_dims.push_back(s.dim_index);
  const auto m = params.mu.rows();
  const auto dp = static_cast<Eigen::Index>(out.kept_dims.size());
  out.mu_selected.resize(m, dp);
  out.sigma_selected.resize(m, dp);
  for (Eigen::Index c = 0; c < dp; ++c) {
    const auto src = static_cast<Eigen::Index>(out.kept_dims[static_cast<std::size_t>(c)]);
    out.mu_selected.col(c) = params.mu.col(src);
    out.sigma_selected.col(c) = params.log_sigma.col(src).array().exp();
  }
  return out;
}

/// SPoSE has no posterior; dimensions are ranked by their l1 mass instead
/// and kept when the mass exceeds `mass_threshold`.
struct MassImportance {
  std::size_t dim_index = 0;
  double l1_mass = 0.0;
  bool selected = false;
};

inline std::vector<MassImportance> select_dimensions_by_mass(const Matrix& x, double mass_threshold) {
  std::vector<MassImportance> out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mass = x.col(j).cwiseAbs().sum();
    out.push_back({static_cast<std::size_t>(j), mass, mass > mass_threshold});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.l1_mass > b.l1_mass; });
  return out;
}

inline PrunedEmbedding prune_by_mass(const Matrix& x, const std::vector<MassImportance>& selection) {
  PrunedEmbedding out;
  for (const auto& s : selection)
    if (s.selected) out.kept_dims.push_back(s.dim_index);
  const auto dp = static_cast<Eigen::Index>(out.kept_dims.size());
  out.mu_selected.resize(x.rows(), dp);
  out.sigma_selected = Matrix::Zero(x.rows(), dp);
  for (Eigen::Index c = 0; c < dp; ++c)
    out.mu_selected.col(c) = x.col(static_cast<Eigen::Index>(out.kept_dims[static_cast<std::size_t>(c)]));
  return out;
}

/// Per-epoch history of selected-dimension counts.
class StabilityTracker {
 public:
  explicit StabilityTracker(std::size_t window) : window_(window) {
    if (window_ < 1) throw ConfigError("stability window must be at least 1");
  }

  void push(std::size_t selected_dims) { history_.push_back(selected_dims); }

  std::size_t window() const noexcept { return window_; }
  const std::vector<std::size_t>& history() const noexcept { return history_; }

 private:
  std::size_t window_;
  std::vector<std::size_t> history_;
};

/// True once the last `window` entries are identical.
inline bool check_convergence(const StabilityTracker& tracker) {
  const auto& h = tracker.history();
  const std::size_t L = tracker.window();
  if (h.size() < L) return false;
  const auto first = h.end() - static_cast<std::ptrdiff_t>(L);
  return std::all_of(first, h.end(), [&](std::size_t v) { return v == *first; });
}

}  // namespace vice
