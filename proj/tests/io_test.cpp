#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <random>

#include "vice/io.hpp"

namespace vice {
namespace {

namespace fs = std::filesystem;

Matrix random_matrix(std::uint64_t seed, Eigen::Index m, Eigen::Index d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix x(m, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("vice_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(TempDir, VariationalCheckpointRoundTripIsExact) {
  Checkpoint c;
  c.vice = VariationalParams(random_matrix(1, 5, 3), random_matrix(2, 5, 3));
  c.prior = SpikeSlabPrior{0.6, 0.125, 0.5};
  c.step = 1234;
  c.epochs = 17;
  save_checkpoint(dir_ / "ck.json", c);
  const auto back = load_checkpoint(dir_ / "ck.json");
  EXPECT_EQ(back.method, Method::kVice);
  EXPECT_EQ(back.vice.mu, c.vice.mu);
  EXPECT_EQ(back.vice.log_sigma, c.vice.log_sigma);
  EXPECT_EQ(back.prior, c.prior);
  EXPECT_EQ(back.step, 1234u);
  EXPECT_EQ(back.epochs, 17u);
  EXPECT_EQ(back.point_embedding(), c.vice.mu.cwiseMax(0.0));
}

TEST_F(TempDir, SpoSECheckpointRoundTrip) {
  Checkpoint c;
  c.method = Method::kSpose;
  c.spose = SpoSEParams{random_matrix(3, 4, 2).cwiseAbs(), 0.008};
  save_checkpoint(dir_ / "ck.json", c);
  const auto back = load_checkpoint(dir_ / "ck.json");
  EXPECT_EQ(back.method, Method::kSpose);
  EXPECT_EQ(back.spose.x, c.spose.x);
  EXPECT_EQ(back.spose.lambda, 0.008);
  EXPECT_EQ(back.num_objects(), 4u);
  EXPECT_EQ(back.dims(), 2u);
}

TEST(Checkpoint, RejectsForeignAndMalformedFiles) {
  EXPECT_THROW(checkpoint_from_json(json{{"format", "other"}}), DataError);
  EXPECT_THROW(checkpoint_from_json(json::array()), DataError);
  json j = checkpoint_to_json(Checkpoint{Method::kVice, VariationalParams(Matrix::Zero(2, 2), Matrix::Zero(2, 2))});
  j["dims"] = 3;
  EXPECT_THROW(checkpoint_from_json(j), DataError);
  j.erase("mu");
  EXPECT_THROW(checkpoint_from_json(j), DataError);
}

TEST(Method, StringConversion) {
  EXPECT_EQ(method_from_string(to_string(Method::kSpose)), Method::kSpose);
  EXPECT_EQ(method_from_string("vice"), Method::kVice);
  EXPECT_THROW(method_from_string("map"), ConfigError);
}

TEST(TrainLogJsonl, RoundTripWithMissingValidation) {
  TrainLog log;
  log.epochs.push_back({1, 2.5, 1.1, 1.4, std::numeric_limits<double>::quiet_NaN(), 20});
  log.epochs.push_back({2, 2.25, 1.0, 1.25, 1.0986, 19});
  const std::string text = trainlog_jsonl(log);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_NE(text.find("\"val_xent\":null"), std::string::npos);
  EXPECT_EQ(parse_trainlog_jsonl(text), log.epochs);
}

TEST(SelectionCsv, Format) {
  EXPECT_EQ(selection_csv({{2, 9, true}, {0, 3, false}}), "dim,significant_objects,selected\n2,9,1\n0,3,0\n");
  EXPECT_EQ(mass_selection_csv({{1, 0.75, true}}), "dim,l1_mass,selected\n1,0.75,1\n");
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.6), "0.6");
  EXPECT_EQ(format_double(0.05 * 3), "0.15000000000000002");
  EXPECT_EQ(format_double(2.0), "2");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(MatrixText, RoundTripIsExact) {
  const Matrix x = random_matrix(5, 6, 3);
  EXPECT_EQ(parse_matrix_text(matrix_text(x)), x);
  EXPECT_THROW(parse_matrix_text("1 2\n3\n"), DataError);
  EXPECT_THROW(parse_matrix_text("1 x\n"), DataError);
}

TEST_F(TempDir, PrunedEmbeddingWithSidecar) {
  PrunedEmbedding p;
  p.mu_selected = random_matrix(6, 4, 2);
  p.sigma_selected = Matrix::Ones(4, 2);
  p.kept_dims = {5, 1};
  write_text(dir_ / "pruned.txt", matrix_text(p.mu_selected));
  write_text(dir_ / "pruned.json", pruned_sidecar(p).dump());
  const auto back = load_pruned(dir_ / "pruned.txt", dir_ / "pruned.json");
  EXPECT_EQ(back.mu_selected, p.mu_selected);
  EXPECT_EQ(back.kept_dims, p.kept_dims);

  write_text(dir_ / "bad.json", json{{"num_objects", 4}, {"dims", 3}, {"kept_dims", {1, 2, 3}}}.dump());
  EXPECT_THROW(load_pruned(dir_ / "pruned.txt", dir_ / "bad.json"), DataError);
}

TEST(GroundTruthJson, RoundTrip) {
  const auto gt = generate_ground_truth(12, 2, 0.4, 3);
  const auto back = ground_truth_from_json(json::parse(ground_truth_to_json(gt).dump()));
  EXPECT_EQ(back.x_true, gt.x_true);
  EXPECT_EQ(back.sparsity, gt.sparsity);
  EXPECT_EQ(back.seed, gt.seed);
}

TEST(Files, MissingFilesAreDataErrors) {
  EXPECT_THROW(read_text("/nonexistent/vice/file"), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/vice/ck.json"), DataError);
}

}  // namespace
}  // namespace vice
