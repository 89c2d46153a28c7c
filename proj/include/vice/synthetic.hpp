#pragma once

// Ground-truth sparse embeddings and simulated odd-one-out responses, with
// an exhaustive Bayes-accuracy oracle for small object sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "vice/dataset.hpp"
#include "vice/error.hpp"
#include "vice/model.hpp"

namespace vice {

struct GroundTruth {
  Matrix x_true;  // m x d*, non-negative
  double sparsity = 0.0;
  std::uint64_t seed = 0;
};

struct GroundTruthOptions {
  int reliability_threshold = 5;
  double visibility_floor = 0.5;
};

/// Exactly round(sparsity * m * d*) entries are zero. Every dimension gets
/// reliability_threshold + 1 entries at or above the visibility floor; the
/// rest of the non-zero entries are placed uniformly. Non-zero values are
/// |N(0, 1)| draws, shifted up by the floor where a visible entry falls short.
inline GroundTruth generate_ground_truth(std::size_t m, std::size_t d_star, double sparsity, std::uint64_t seed,
                                         const GroundTruthOptions& opt = {}) {
  if (m < 3) throw ConfigError("generate_ground_truth: need at least 3 objects");
  if (d_star < 1) throw ConfigError("generate_ground_truth: need at least one dimension");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw ConfigError("generate_ground_truth: sparsity must lie in [0, 1)");
  const std::size_t visible = static_cast<std::size_t>(opt.reliability_threshold + 1);
  const std::size_t total = m * d_star;
  const auto zeros = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(total)));
  const std::size_t nonzeros = total - zeros;
  if (m < visible || nonzeros < visible * d_star)
    throw ConfigError("generate_ground_truth: " + std::to_string(nonzeros) + " non-zero entries cannot give " +
                      std::to_string(d_star) + " dimensions " + std::to_string(visible) + " visible objects each");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto slab = [&] {
    double v = 0.0;
    while (v == 0.0) v = std::abs(normal(rng));
    return v;
  };

  GroundTruth gt{Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d_star)), sparsity, seed};
  std::vector<bool> used(total, false);
  std::vector<std::size_t> objects(m);
  for (std::size_t j = 0; j < d_star; ++j) {
    std::iota(objects.begin(), objects.end(), std::size_t{0});
    std::shuffle(objects.begin(), objects.end(), rng);
    for (std::size_t s = 0; s < visible; ++s) {
      const std::size_t i = objects[s];
      double v = slab();
      if (v < opt.visibility_floor) v += opt.visibility_floor;
      gt.x_true(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      used[i * d_star + j] = true;
    }
  }
  std::vector<std::size_t> free_cells;
  for (std::size_t c = 0; c < total; ++c)
    if (!used[c]) free_cells.push_back(c);
  std::shuffle(free_cells.begin(), free_cells.end(), rng);
  for (std::size_t s = 0; s < nonzeros - visible * d_star; ++s) {
    const std::size_t c = free_cells[s];
    gt.x_true(static_cast<Eigen::Index>(c / d_star), static_cast<Eigen::Index>(c % d_star)) = slab();
  }
  return gt;
}

/// Uniform triplets over all C(m,3) sets; choices drawn from the softmax
/// choice model at the ground truth.
inline TripletDataset sample_triplets(const Matrix& x_true, std::size_t n, std::uint64_t seed) {
  const auto m = static_cast<ObjectIndex>(x_true.rows());
  if (m < 3) throw ConfigError("sample_triplets: need at least 3 objects");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<ObjectIndex> pick(0, m - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<TripletRecord> records;
  records.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    ObjectIndex a = pick(rng), b = pick(rng), c = pick(rng);
    while (b == a) b = pick(rng);
    while (c == a || c == b) c = pick(rng);
    const auto t = Triplet::of(a, b, c);
    const auto p = pair_probs(x_true, t);
    const double u = unif(rng);
    const PairSlot slot = u < p[0] ? PairSlot::kAB : (u < p[0] + p[1] ? PairSlot::kAC : PairSlot::kBC);
    records.push_back(TripletRecord::from_slot(t, slot));
  }
  return TripletDataset(std::move(records), m);
}

inline TripletDataset sample_triplets(const GroundTruth& gt, std::size_t n, std::uint64_t seed) {
  return sample_triplets(gt.x_true, n, seed);
}

inline constexpr std::size_t kMaxEnumerableObjects = 60;

/// Exact mean over all triplets of the largest choice probability.
inline double bayes_accuracy(const Matrix& x_true) {
  const auto m = static_cast<ObjectIndex>(x_true.rows());
  if (m < 3) throw ConfigError("bayes_accuracy: need at least 3 objects");
  if (m > kMaxEnumerableObjects)
    throw ConfigError("bayes_accuracy: " + std::to_string(m) +
                      " objects is too many to enumerate; estimate from sampled triplets instead");
  double sum = 0.0;
  std::uint64_t count = 0;
  for (ObjectIndex a = 0; a < m; ++a)
    for (ObjectIndex b = a + 1; b < m; ++b)
      for (ObjectIndex c = b + 1; c < m; ++c) {
        const auto p = pair_probs(x_true, Triplet{{a, b, c}});
        sum += std::max({p[0], p[1], p[2]});
        ++count;
      }
  return sum / static_cast<double>(count);
}

inline double bayes_accuracy(const GroundTruth& gt) { return bayes_accuracy(gt.x_true); }

}  // namespace vice
