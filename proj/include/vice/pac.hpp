#pragma once

// Sample-size planning and retrospective generalization bounds for the
// argmax predictor of a quantized non-negative embedding. The hypothesis
// class is every m x d matrix over the grid {0, delta, ..., k*delta}, so
// |H| = (k+1)^(m d) and Hoeffding plus a union bound gives
//   n >= (m d log(k+1) + log(1/delta_conf)) / (2 eps^2).
//
// Retrospectively the bound is used as R <= R_hat + eps. Hoeffding is
// symmetric, so the upper tail holds at the same confidence as the lower
// tail the planning inequality is usually stated for.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vice/dataset.hpp"
#include "vice/error.hpp"
#include "vice/eval.hpp"
#include "vice/format.hpp"
#include "vice/model.hpp"

namespace vice {

struct QuantizationSpec {
  double delta = 0.05;
  double max_value = 1.0;

  /// Number of non-zero grid levels, ceil(M / delta).
  std::uint64_t k() const {
    if (max_value <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::ceil(max_value / delta));
  }
};

/// Rounds each entry to the nearest multiple of `delta`; exact midpoints
/// round up.
inline Matrix quantize(const Matrix& x, const QuantizationSpec& spec) {
  if (!(spec.delta > 0.0)) throw ConfigError("quantization delta must be positive");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      if (v < 0.0 || !std::isfinite(v))
        throw DataError("quantize: entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
      if (v > spec.max_value)
        throw DataError("quantize: entry (" + std::to_string(i) + "," + std::to_string(j) + ") = " +
                        std::to_string(v) + " exceeds M = " + std::to_string(spec.max_value));
      out(i, j) = std::floor(v / spec.delta + 0.5) * spec.delta;
    }
  }
  return out;
}

/// Hoeffding slack for a finite class of (k+1)^(m d) hypotheses.
inline double hoeffding_epsilon(std::uint64_t n, std::uint64_t m, std::uint64_t d, std::uint64_t k,
                                double delta_conf) {
  if (n < 1) throw ConfigError("hoeffding_epsilon: n must be at least 1");
  if (!(delta_conf > 0.0 && delta_conf <= 1.0)) throw ConfigError("hoeffding_epsilon: delta must lie in (0, 1]");
  const double complexity = static_cast<double>(m) * static_cast<double>(d) * std::log(static_cast<double>(k) + 1.0);
  return std::sqrt((complexity + std::log(1.0 / delta_conf)) / (2.0 * static_cast<double>(n)));
}

/// Smallest n for which the bound guarantees slack `epsilon` at confidence 1 - delta.
inline std::uint64_t prospective_sample_size(std::uint64_t m, std::uint64_t d, std::uint64_t k, double delta_conf,
                                             double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("prospective_sample_size: epsilon must be positive");
  if (!(delta_conf > 0.0 && delta_conf < 1.0)) throw ConfigError("prospective_sample_size: delta must lie in (0, 1)");
  const double complexity = static_cast<double>(m) * static_cast<double>(d) * std::log(static_cast<double>(k) + 1.0);
  return static_cast<std::uint64_t>(std::ceil((complexity + std::log(1.0 / delta_conf)) / (2.0 * epsilon * epsilon)));
}

/// Zero-one training error of the argmax predictor.
inline double empirical_error(const Matrix& x_quant, const TripletDataset& data) {
  if (data.empty()) throw DataError("empirical_error: empty dataset");
  return 1.0 - accuracy(predict_all(x_quant, data), data);
}

struct BoundRow {
  double delta = 0.0;
  std::uint64_t k = 0;
  double empirical_error = 0.0;
  double epsilon = 0.0;
  double upper_bound = 0.0;
};

struct BoundReport {
  BoundRow best;
  double delta_confidence = 0.0;  // per-scale confidence, alpha / num_scales
  double alpha = 0.0;
  double max_value = 0.0;
  std::uint64_t num_objects = 0;
  std::uint64_t dims = 0;
  std::uint64_t n = 0;
  std::vector<BoundRow> table;
  std::vector<std::string> warnings;
};

/// The scale grid {0.05, 0.10, ..., 1.00}.
inline std::vector<double> default_delta_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 20; ++i) out.push_back(0.05 * i);
  return out;
}

/// Scans the quantization scales, bounding each with confidence alpha /
/// num_scales so the minimum over scales holds with probability >= 1 - alpha.
inline BoundReport retrospective_bound(const Matrix& embedding, const TripletDataset& data,
                                       const std::vector<double>& deltas, double alpha) {
  if (deltas.empty()) throw ConfigError("retrospective_bound: empty scale grid");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("retrospective_bound: alpha must lie in (0, 1)");
  if (data.empty()) throw DataError("retrospective_bound: empty dataset");
  if ((embedding.array() < 0.0).any()) throw DataError("retrospective_bound: embedding must be non-negative");

  BoundReport rep;
  rep.alpha = alpha;
  rep.delta_confidence = alpha / static_cast<double>(deltas.size());
  rep.max_value = embedding.size() ? embedding.maxCoeff() : 0.0;
  rep.num_objects = static_cast<std::uint64_t>(embedding.rows());
  rep.dims = static_cast<std::uint64_t>(embedding.cols());
  rep.n = data.size();
  if (rep.max_value <= 0.0)
    rep.warnings.push_back("embedding is identically zero; every scale collapses to k = 0");

  std::optional<std::size_t> best;
  for (double delta : deltas) {
    if (!(delta > 0.0)) throw ConfigError("retrospective_bound: scales must be positive");
    const QuantizationSpec spec{delta, rep.max_value};
    BoundRow row;
    row.delta = delta;
    row.k = spec.k();
    const Matrix q = rep.max_value > 0.0 ? quantize(embedding, spec) : embedding;
    row.empirical_error = empirical_error(q, data);
    row.epsilon = hoeffding_epsilon(rep.n, rep.num_objects, rep.dims, row.k, rep.delta_confidence);
    row.upper_bound = row.empirical_error + row.epsilon;
    rep.table.push_back(row);
    if (!best || row.upper_bound < rep.table[*best].upper_bound) best = rep.table.size() - 1;
  }
  rep.best = rep.table[*best];
  return rep;
}

inline void write_bound_csv(std::ostream& out, const BoundReport& rep) {
  out << "delta,k,empirical_error,epsilon,upper_bound,best\n";
  for (const auto& r : rep.table) {
    out << format_double(r.delta) << ',' << r.k << ',' << format_double(r.empirical_error) << ','
        << format_double(r.epsilon) << ',' << format_double(r.upper_bound) << ','
        << (r.delta == rep.best.delta ? 1 : 0) << '\n';
  }
}

}  // namespace vice
