#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "vice/pruning.hpp"

namespace vice {
namespace {

TEST(ZeroProbability, Examples) {
  EXPECT_DOUBLE_EQ(zero_probability(0.0, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(zero_probability(0.0, 7.0), 0.5);
  // scipy.stats.norm.cdf(-1.6449)
  EXPECT_NEAR(zero_probability(1.6449 * 0.4, 0.4), 0.04999521746834630, 1e-12);
  EXPECT_EQ(zero_probability(1e6, 1.0), 0.0);
  EXPECT_NEAR(zero_probability(-3.0, 1.0), 0.99865010196837, 1e-12);
  EXPECT_THROW(zero_probability(1.0, 0.0), ConfigError);
  EXPECT_THROW(zero_probability(1.0, -1.0), ConfigError);
}

TEST(ZeroProbability, LogScaleAgreesAndHandlesUnderflow) {
  EXPECT_NEAR(zero_probability_log_scale(0.7, std::log(0.3)), zero_probability(0.7, 0.3), 1e-15);
  EXPECT_EQ(zero_probability_log_scale(0.1, -800.0), 0.0);
  EXPECT_EQ(zero_probability_log_scale(-0.1, -800.0), 1.0);
  EXPECT_EQ(zero_probability_log_scale(0.0, -800.0), 0.5);
}

TEST(SignificantObjectCount, Examples) {
  EXPECT_EQ(significant_object_count(std::vector<double>(10, 0.001), 0.05), 10);
  EXPECT_EQ(significant_object_count(std::vector<double>(10, 0.5), 0.05), 0);
  EXPECT_EQ(significant_object_count({0.01, 0.02, 0.03, 0.9, 0.9}, 0.05), 3);
  EXPECT_EQ(significant_object_count({}, 0.05), 0);
}

TEST(SignificantObjectCount, PosteriorFilterVersusBhOnly) {
  // BH at a loose level rejects everything up to 0.2; the filter keeps p <= 0.05.
  const std::vector<double> p{0.01, 0.04, 0.06, 0.2};
  EXPECT_EQ(significant_object_count(p, 0.9), 2);
  EXPECT_EQ(significant_object_count(p, 0.9, 0.95, true), 4);
}

int brute_force_bh(const std::vector<double>& p, double alpha) {
  const std::size_t m = p.size();
  std::size_t k = 0;
  for (std::size_t i = 1; i <= m; ++i) {
    // p_(i): the i-th smallest, found by counting.
    for (double v : p) {
      const auto below = static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [&](double w) { return w < v; }));
      const auto upto = static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [&](double w) { return w <= v; }));
      if (below < i && i <= upto && v <= static_cast<double>(i) * alpha / static_cast<double>(m)) k = i;
    }
  }
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  int count = 0;
  for (double v : p)
    if (k > 0 && v <= sorted[k - 1] && v <= 0.05) ++count;
  return count;
}

std::vector<double> random_p_values(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 2);
  std::vector<double> p(static_cast<std::size_t>(size(rng)));
  for (auto& v : p) {
    switch (kind(rng)) {
      case 0: v = u(rng); break;
      case 1: v = 0.1 * u(rng); break;
      default: v = std::round(u(rng) * 20.0) / 400.0; break;  // repeated values near the cut-offs
    }
  }
  return p;
}

TEST(SignificantObjectCount, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 500; ++rep) {
    const auto p = random_p_values(rng);
    EXPECT_EQ(significant_object_count(p, 0.05), brute_force_bh(p, 0.05));
  }
}

TEST(SignificantObjectCount, MonotoneInEachPValue) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    auto p = random_p_values(rng);
    const int before = significant_object_count(p, 0.05);
    auto& v = p[static_cast<std::size_t>(rng() % p.size())];
    v = std::min(1.0, v + u(rng) * 0.1);
    EXPECT_LE(significant_object_count(p, 0.05), before);
  }
}

TEST(BenjaminiHochberg, BetweenBonferroniAndUncorrected) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 300; ++rep) {
    const auto p = random_p_values(rng);
    const auto reject = benjamini_hochberg(p, 0.05);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0.05 / static_cast<double>(p.size())) EXPECT_TRUE(reject[i]);
      if (reject[i]) EXPECT_LE(p[i], 0.05);
    }
  }
}

VariationalParams constant_params(Eigen::Index m, Eigen::Index d, double mu, double sigma) {
  return VariationalParams(Matrix::Constant(m, d, mu), Matrix::Constant(m, d, std::log(sigma)));
}

TEST(SelectDimensions, AllStronglyPositive) {
  const auto sel = select_dimensions(constant_params(12, 4, 1.0, 0.1));
  ASSERT_EQ(sel.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(sel[j].dim_index, j);
    EXPECT_EQ(sel[j].significant_objects, 12);
    EXPECT_TRUE(sel[j].selected);
  }
}

TEST(SelectDimensions, ZeroMeanSelectsNothing) {
  const auto sel = select_dimensions(constant_params(12, 4, 0.0, 1.0));
  EXPECT_EQ(count_selected(sel), 0u);
}

TEST(SelectDimensions, SixConfidentObjectsVersusFive) {
  // mu/sigma = 4 gives p ~ 3e-5; mu = 0 gives p = 0.5.
  auto params = constant_params(20, 3, 0.0, 1.0);
  for (int i = 0; i < 5; ++i) params.mu(i, 0) = 4.0;
  for (int i = 0; i < 6; ++i) params.mu(i, 2) = 4.0;
  const auto sel = select_dimensions(params);
  EXPECT_EQ(sel[0].dim_index, 2u);
  EXPECT_EQ(sel[0].significant_objects, 6);
  EXPECT_TRUE(sel[0].selected);
  EXPECT_EQ(sel[1].dim_index, 0u);
  EXPECT_EQ(sel[1].significant_objects, 5);
  EXPECT_FALSE(sel[1].selected);
  EXPECT_EQ(count_selected(sel), 1u);

  PruningOptions loose;
  loose.reliability_threshold = 4;
  EXPECT_EQ(count_selected(select_dimensions(params, loose)), 2u);
}

TEST(SelectDimensions, OrderIsCountDescendingThenIndex) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix mu(15, 7), ls(15, 7);
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      mu.data()[i] = 2.0 * n(rng);
      ls.data()[i] = -1.0 + 0.5 * n(rng);
    }
    const auto sel = select_dimensions(VariationalParams(mu, ls));
    for (std::size_t s = 1; s < sel.size(); ++s) {
      const auto& a = sel[s - 1];
      const auto& b = sel[s];
      EXPECT_TRUE(a.significant_objects > b.significant_objects ||
                  (a.significant_objects == b.significant_objects && a.dim_index < b.dim_index));
    }
    for (const auto& s : sel) {
      EXPECT_GE(s.significant_objects, 0);
      EXPECT_LE(s.significant_objects, 15);
      EXPECT_EQ(s.selected, s.significant_objects > 5);
    }
  }
}

TEST(Prune, CopiesColumnsInSelectionOrder) {
  Matrix mu(8, 3);
  mu.col(0).setConstant(1.0);
  mu.col(1).setConstant(0.0);
  mu.col(2).setConstant(2.0);
  mu(0, 0) = 0.0;  // column 0 has one fewer significant object
  VariationalParams params(mu, Matrix::Constant(8, 3, std::log(0.1)));
  const auto pruned = prune(params, select_dimensions(params));
  EXPECT_EQ(pruned.kept_dims, (std::vector<std::size_t>{2, 0}));
  EXPECT_EQ(pruned.mu_selected.col(0), mu.col(2));
  EXPECT_EQ(pruned.mu_selected.col(1), mu.col(0));
  EXPECT_NEAR(pruned.sigma_selected(3, 1), 0.1, 1e-15);
}

TEST(Prune, AllSelectedIsAPermutationAndNoneIsEmpty) {
  const auto all = prune(constant_params(7, 3, 1.0, 0.1), select_dimensions(constant_params(7, 3, 1.0, 0.1)));
  EXPECT_EQ(all.dims(), 3u);
  auto none_params = constant_params(7, 3, 0.0, 1.0);
  const auto none = prune(none_params, select_dimensions(none_params));
  EXPECT_EQ(none.dims(), 0u);
  EXPECT_EQ(none.mu_selected.rows(), 7);
  EXPECT_EQ(none.mu_selected.cols(), 0);
}

TEST(SelectByMass, ThresholdAndOrder) {
  Matrix x(3, 3);
  x << 0.1, 0.0, 1.0,
       0.1, 0.3, 1.0,
       0.1, 0.3, 0.0;
  const auto sel = select_dimensions_by_mass(x, 0.5);
  EXPECT_EQ(sel[0].dim_index, 2u);
  EXPECT_EQ(sel[1].dim_index, 1u);
  EXPECT_TRUE(sel[1].selected);  // 0.6
  EXPECT_FALSE(sel[2].selected);  // 0.3
  const auto pruned = prune_by_mass(x, sel);
  EXPECT_EQ(pruned.kept_dims, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(pruned.mu_selected.col(1), x.col(1));
}

TEST(Convergence, Examples) {
  StabilityTracker a(500);
  for (int i = 0; i < 500; ++i) a.push(44);
  EXPECT_TRUE(check_convergence(a));

  StabilityTracker b(500);
  for (int i = 0; i < 499; ++i) b.push(44);
  b.push(45);
  EXPECT_FALSE(check_convergence(b));

  StabilityTracker c(1);
  EXPECT_FALSE(check_convergence(c));
  c.push(3);
  EXPECT_TRUE(check_convergence(c));
  c.push(9);
  EXPECT_TRUE(check_convergence(c));

  StabilityTracker short_history(10);
  for (int i = 0; i < 9; ++i) short_history.push(1);
  EXPECT_FALSE(check_convergence(short_history));
  EXPECT_THROW(StabilityTracker(0), ConfigError);
}

TEST(Convergence, IgnoresEntriesOlderThanTheWindow) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t L = 1 + rng() % 6;
    std::vector<std::size_t> tail(L + rng() % 4);
    for (auto& v : tail) v = rng() % 2;
    StabilityTracker plain(L), prefixed(L);
    for (int i = 0; i < 7; ++i) prefixed.push(rng() % 50);
    for (auto v : tail) {
      plain.push(v);
      prefixed.push(v);
    }
    EXPECT_EQ(check_convergence(plain), check_convergence(prefixed));
  }
}

}  // namespace
}  // namespace vice
