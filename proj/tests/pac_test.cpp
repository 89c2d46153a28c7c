#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vice/pac.hpp"
#include "vice/synthetic.hpp"

namespace vice {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(Quantize, NearestMultipleWithHalfUp) {
  EXPECT_DOUBLE_EQ(quantize(scalar(0.73), {0.5, 2.0})(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(quantize(scalar(0.75), {0.5, 2.0})(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(quantize(scalar(0.0), {0.5, 2.0})(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(quantize(scalar(2.0), {0.5, 2.0})(0, 0), 2.0);
}

TEST(Quantize, LevelCount) {
  EXPECT_EQ((QuantizationSpec{0.05, 2.6285}.k()), 53u);
  EXPECT_EQ((QuantizationSpec{0.5, 2.0}.k()), 4u);
  EXPECT_EQ((QuantizationSpec{0.5, 0.0}.k()), 0u);
}

TEST(Quantize, RangeErrorsNameTheEntry) {
  Matrix x = Matrix::Constant(2, 3, 0.1);
  x(1, 2) = 3.5;
  try {
    quantize(x, {0.5, 3.0});
    FAIL() << "expected a range error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos);
  }
  x(1, 2) = -0.1;
  EXPECT_THROW(quantize(x, {0.5, 3.0}), DataError);
  EXPECT_THROW(quantize(scalar(0.1), {0.0, 1.0}), ConfigError);
}

TEST(Quantize, IdempotentAndWithinHalfStep) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (double delta : {0.05, 0.1, 0.3, 0.5, 1.0}) {
    Matrix x(20, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    const QuantizationSpec spec{delta, 3.0 + delta};
    const Matrix q = quantize(x, spec);
    EXPECT_EQ(quantize(q, spec), q);
    EXPECT_LE((q - x).cwiseAbs().maxCoeff(), delta / 2 + 1e-12);
  }
}

TEST(HoeffdingEpsilon, WorkedExample) {
  EXPECT_NEAR(hoeffding_epsilon(50000, 36, 5, 4, 0.001), 0.05446159927114886, 1e-14);
}

TEST(HoeffdingEpsilon, UnitConfidenceDropsTheLogTerm) {
  EXPECT_NEAR(hoeffding_epsilon(1000, 3, 2, 4, 1.0), std::sqrt(6 * std::log(5.0) / 2000.0), 1e-15);
}

TEST(HoeffdingEpsilon, ScalingAndMonotonicity) {
  const double e = hoeffding_epsilon(1000, 10, 3, 5, 0.01);
  EXPECT_NEAR(hoeffding_epsilon(4000, 10, 3, 5, 0.01), e / 2, 1e-15);
  EXPECT_LT(hoeffding_epsilon(1001, 10, 3, 5, 0.01), e);
  EXPECT_GT(hoeffding_epsilon(1000, 11, 3, 5, 0.01), e);
  EXPECT_GT(hoeffding_epsilon(1000, 10, 4, 5, 0.01), e);
  EXPECT_GT(hoeffding_epsilon(1000, 10, 3, 6, 0.01), e);
  EXPECT_THROW(hoeffding_epsilon(0, 1, 1, 1, 0.1), ConfigError);
  EXPECT_THROW(hoeffding_epsilon(10, 1, 1, 1, 0.0), ConfigError);
}

TEST(ProspectiveSampleSize, WorkedExample) {
  EXPECT_EQ(prospective_sample_size(36, 5, 4, 0.001, 0.1), 14831u);
}

TEST(ProspectiveSampleSize, MatchesTheFiftyConstantAndInvertsEpsilon) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const std::uint64_t m = 3 + rng() % 200, d = 1 + rng() % 50;
    const auto n = prospective_sample_size(m, d, 4, 0.001, 0.1);
    const double expected = 50.0 * (static_cast<double>(m * d) * std::log(5.0) + std::log(1000.0));
    EXPECT_EQ(n, static_cast<std::uint64_t>(std::ceil(expected)));
    EXPECT_LE(hoeffding_epsilon(n, m, d, 4, 0.001), 0.1);
    EXPECT_GT(hoeffding_epsilon(n - 1, m, d, 4, 0.001), 0.1);
    const auto n_half = prospective_sample_size(m, d, 4, 0.001, 0.05);
    EXPECT_LE(n_half, 4 * n);
    EXPECT_GE(n_half, 4 * n - 4);
  }
  EXPECT_THROW(prospective_sample_size(1, 1, 1, 1.0, 0.1), ConfigError);
  EXPECT_THROW(prospective_sample_size(1, 1, 1, 0.1, 0.0), ConfigError);
}

TEST(EmpiricalError, ZeroEmbeddingIsChanceOnSymmetricData) {
  const auto data = sample_triplets(Matrix::Zero(10, 2), 6000, 3);
  const double err = empirical_error(Matrix::Zero(10, 2), data);
  EXPECT_NEAR(err, 2.0 / 3.0, 0.02);
}

TEST(EmpiricalError, FineGridMatchesUnquantized) {
  const auto gt = generate_ground_truth(12, 2, 0.5, 4);
  const auto data = sample_triplets(gt, 3000, 5);
  const double raw = empirical_error(gt.x_true, data);
  const double fine = empirical_error(quantize(gt.x_true, {1e-6, gt.x_true.maxCoeff()}), data);
  EXPECT_NEAR(fine, raw, 0.005);
  EXPECT_GE(raw, 0.0);
  EXPECT_LE(raw, 1.0);
}

TEST(RetrospectiveBound, TableAndBestRow) {
  const auto gt = generate_ground_truth(12, 2, 0.5, 6);
  const auto data = sample_triplets(gt, 4000, 7);
  const auto rep = retrospective_bound(gt.x_true, data, default_delta_grid(), 0.05);
  ASSERT_EQ(rep.table.size(), 20u);
  EXPECT_DOUBLE_EQ(rep.delta_confidence, 0.05 / 20);
  EXPECT_EQ(rep.n, 4000u);
  EXPECT_EQ(rep.dims, 2u);
  EXPECT_DOUBLE_EQ(rep.max_value, gt.x_true.maxCoeff());
  for (const auto& row : rep.table) {
    EXPECT_EQ(row.k, (QuantizationSpec{row.delta, rep.max_value}.k()));
    EXPECT_DOUBLE_EQ(row.epsilon, hoeffding_epsilon(4000, 12, 2, row.k, 0.05 / 20));
    EXPECT_DOUBLE_EQ(row.upper_bound, row.empirical_error + row.epsilon);
    EXPECT_GE(row.upper_bound, rep.best.upper_bound);
  }
  EXPECT_TRUE(rep.warnings.empty());

  std::ostringstream csv;
  write_bound_csv(csv, rep);
  const std::string s = csv.str();
  EXPECT_EQ(s.rfind("delta,k,empirical_error,epsilon,upper_bound,best\n", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 21);
}

TEST(RetrospectiveBound, HugeSampleApproachesEmpiricalError) {
  const auto gt = generate_ground_truth(8, 1, 0.0, 8);
  const auto data = sample_triplets(gt, 200000, 9);
  const auto rep = retrospective_bound(gt.x_true, data, {0.05}, 0.05);
  EXPECT_LT(rep.best.epsilon, 0.01);
}

TEST(RetrospectiveBound, ZeroEmbeddingWarns) {
  const auto data = sample_triplets(Matrix::Zero(5, 2), 100, 1);
  const auto rep = retrospective_bound(Matrix::Zero(5, 2), data, {0.1, 0.2}, 0.05);
  EXPECT_EQ(rep.best.k, 0u);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(RetrospectiveBound, InvalidInputs) {
  const auto data = sample_triplets(Matrix::Zero(5, 2), 10, 1);
  EXPECT_THROW(retrospective_bound(Matrix::Zero(5, 2), data, {}, 0.05), ConfigError);
  EXPECT_THROW(retrospective_bound(Matrix::Zero(5, 2), data, {0.1}, 1.0), ConfigError);
  EXPECT_THROW(retrospective_bound(Matrix::Constant(5, 2, -1.0), data, {0.1}, 0.05), DataError);
}

}  // namespace
}  // namespace vice
