#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "vice/dataset.hpp"

namespace vice {
namespace {

TripletDataset parse(const std::string& text, std::size_t m) {
  std::istringstream in(text);
  return parse_dataset(in, m);
}

TEST(ParseDataset, ChosenPairFirstThenOddOne) {
  const auto d = parse("268 609 1853\n", 1854);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].triplet(), Triplet::of(268, 609, 1853));
  EXPECT_EQ(d[0].chosen(), PairSlot::kAB);
  EXPECT_EQ(d[0].odd, 1853u);
}

TEST(ParseDataset, PairOrderIsIrrelevant) {
  const auto d = parse("2 0 1\n", 3);
  EXPECT_EQ(d[0].triplet(), Triplet::of(0, 1, 2));
  EXPECT_EQ(d[0].chosen(), PairSlot::kAC);  // {0, 2}
  EXPECT_TRUE(d[0].same_judgment(TripletRecord{0, 2, 1}));
}

TEST(ParseDataset, DuplicateIndexIsMalformedWithLineNumber) {
  try {
    parse("# header\n0 1 2\n0 1 1\n", 3);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
  }
}

TEST(ParseDataset, IndexOutOfRange) {
  EXPECT_THROW(parse("0 1 5\n", 5), ParseError);
  EXPECT_NO_THROW(parse("0 1 4\n", 5));
}

TEST(ParseDataset, WrongFieldCount) {
  EXPECT_THROW(parse("0 1\n", 5), ParseError);
  EXPECT_THROW(parse("0 1 2 3\n", 5), ParseError);
  EXPECT_THROW(parse("0,,1\n", 5), ParseError);
  EXPECT_THROW(parse("0 -1 2\n", 5), ParseError);
}

TEST(ParseDataset, SeparatorsAndComments) {
  const auto d = parse("  # comment\n\n0\t1   2\n3,4,0\n  1 , 2 , 3\n", 5);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[1].first, 3u);
  EXPECT_EQ(d[1].odd, 0u);
  EXPECT_EQ(d[2].odd, 3u);
}

TEST(ParseDataset, RoundTripNormalizesWhitespaceAndDropsComments) {
  const std::string src = "# c\n0\t1 2\n3,4,0\n\n  4 1    2\n";
  const auto d = parse(src, 5);
  std::ostringstream out;
  write_dataset(out, d);
  EXPECT_EQ(out.str(), "0 1 2\n3 4 0\n4 1 2\n");
  EXPECT_EQ(parse(out.str(), 5).records(), d.records());
}

TripletDataset sequential(std::size_t n, std::size_t m = 10) {
  std::vector<TripletRecord> r;
  for (std::size_t s = 0; s < n; ++s) {
    const auto a = static_cast<ObjectIndex>(s % m);
    r.push_back({a, static_cast<ObjectIndex>((a + 1) % m), static_cast<ObjectIndex>((a + 2) % m)});
  }
  return TripletDataset(std::move(r), m);
}

TEST(SplitDataset, ExactDivision) {
  const auto s = split_dataset(sequential(100), {0.9, 0.1, 0.0}, 7);
  EXPECT_EQ(s.train.size(), 90u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 0u);
}

TEST(SplitDataset, RemainderGoesToTrain) {
  const auto s = split_dataset(sequential(101), {0.9, 0.1, 0.0}, 7);
  EXPECT_EQ(s.train.size(), 91u);
  EXPECT_EQ(s.val.size(), 10u);
}

TEST(SplitDataset, LowDataProtocolFractions) {
  const auto s = split_dataset(sequential(1000), {0.45, 0.05, 0.5}, 3);
  EXPECT_EQ(s.train.size(), 450u);
  EXPECT_EQ(s.val.size(), 50u);
  EXPECT_EQ(s.test.size(), 500u);
}

TEST(SplitDataset, PartitionIsAMultisetOfTheInputAndSeeded) {
  const auto data = sequential(257, 13);
  const auto a = split_dataset(data, {0.5, 0.3, 0.2}, 11);
  const auto b = split_dataset(data, {0.5, 0.3, 0.2}, 11);
  EXPECT_EQ(a.train.records(), b.train.records());
  EXPECT_EQ(a.val.records(), b.val.records());
  EXPECT_EQ(a.test.records(), b.test.records());

  auto key = [](const TripletRecord& r) { return std::tuple(r.first, r.second, r.odd); };
  std::vector<std::tuple<ObjectIndex, ObjectIndex, ObjectIndex>> in, out;
  for (const auto& r : data.records()) in.push_back(key(r));
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (const auto& r : part->records()) out.push_back(key(r));
  std::sort(in.begin(), in.end());
  std::sort(out.begin(), out.end());
  EXPECT_EQ(in, out);

  const auto c = split_dataset(data, {0.5, 0.3, 0.2}, 12);
  EXPECT_NE(a.train.records(), c.train.records());
}

TEST(SplitDataset, Errors) {
  EXPECT_THROW(split_dataset(TripletDataset({}, 3), {1.0, 0.0, 0.0}, 1), DataError);
  EXPECT_THROW(split_dataset(sequential(10), {0.5, 0.4, 0.0}, 1), ConfigError);
  EXPECT_THROW(split_dataset(sequential(10), {1.1, -0.1, 0.0}, 1), ConfigError);
}

TEST(AggregateRepeats, CountsAndProbabilities) {
  std::vector<TripletRecord> r;
  for (int i = 0; i < 20; ++i) r.push_back({1, 0, 2});
  for (int i = 0; i < 3; ++i) r.push_back({0, 2, 1});
  for (int i = 0; i < 2; ++i) r.push_back({2, 1, 0});
  const auto dists = aggregate_repeats(TripletDataset(r, 3));
  ASSERT_EQ(dists.size(), 1u);
  EXPECT_EQ(dists[0].counts, (std::array<std::uint64_t, 3>{20, 3, 2}));
  EXPECT_NEAR(dists[0].probabilities[0], 0.8, 1e-15);
  EXPECT_NEAR(dists[0].probabilities[1], 0.12, 1e-15);
  EXPECT_NEAR(dists[0].probabilities[2], 0.08, 1e-15);
}

TEST(AggregateRepeats, SingletonsAreOneHot) {
  const auto dists = aggregate_repeats(TripletDataset({{0, 1, 2}, {3, 1, 0}}, 4));
  ASSERT_EQ(dists.size(), 2u);
  EXPECT_EQ(dists[0].probabilities, (std::array<double, 3>{1, 0, 0}));
  EXPECT_EQ(dists[1].triplet, Triplet::of(0, 1, 3));
  EXPECT_EQ(dists[1].probabilities, (std::array<double, 3>{0, 0, 1}));  // {1,3} chosen
}

TEST(AggregateRepeats, RandomDataInvariants) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<ObjectIndex> pick(0, 5);
  std::vector<TripletRecord> r;
  while (r.size() < 500) {
    ObjectIndex a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || a == c || b == c) continue;
    r.push_back({a, b, c});
  }
  const auto dists = aggregate_repeats(TripletDataset(r, 6));
  std::uint64_t total = 0;
  for (const auto& d : dists) {
    EXPECT_NEAR(d.probabilities[0] + d.probabilities[1] + d.probabilities[2], 1.0, 1e-12);
    total += d.total();
  }
  EXPECT_EQ(total, r.size());
  const double ceiling = accuracy_ceiling(dists);
  EXPECT_GE(ceiling, 1.0 / 3.0);
  EXPECT_LE(ceiling, 1.0);
}

TEST(AccuracyCeiling, WorkedExample) {
  ResponseDistribution a{Triplet::of(0, 1, 2), {2, 3, 5}, {0.2, 0.3, 0.5}};
  ResponseDistribution b{Triplet::of(0, 1, 3), {1, 8, 1}, {0.1, 0.8, 0.1}};
  EXPECT_NEAR(accuracy_ceiling({a, b}), 0.65, 1e-15);
}

TEST(AccuracyCeiling, Extremes) {
  ResponseDistribution one_hot{Triplet::of(0, 1, 2), {4, 0, 0}, {1, 0, 0}};
  ResponseDistribution uniform{Triplet::of(0, 1, 2), {1, 1, 1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  EXPECT_DOUBLE_EQ(accuracy_ceiling({one_hot, one_hot}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy_ceiling({uniform}), 1.0 / 3);
  EXPECT_THROW(accuracy_ceiling({}), DataError);
}

TEST(Distributions, CsvUsesCanonicalPairOrder) {
  std::ostringstream out;
  write_distributions_csv(out, aggregate_repeats(TripletDataset({{2, 1, 0}}, 3)));
  EXPECT_EQ(out.str(), "i,j,k,p_ij,p_ik,p_jk\n0,1,2,0,0,1\n");
}

}  // namespace
}  // namespace vice
