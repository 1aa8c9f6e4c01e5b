#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mtsg/tabular.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using mtsg::Matrix;
using testutil::Rng;

namespace {

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(KennardStone, MatchesGreedyOracleOnContinuousData) {
  Rng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.index(49);
    const std::size_t f = 1 + rng.index(5);
    const double frac = rng.uniform(0.05, 1.0);
    const Matrix x = testutil::random_matrix(rng, n, f);
    const auto split = mtsg::kennard_stone_split(x, frac);
    const auto expected = oracle::kennard_stone(testutil::to_rows(x), mtsg::train_size_for(n, frac));
    ASSERT_EQ(split.train, expected) << "rep " << rep << " n=" << n << " f=" << f;
  }
}

TEST(KennardStone, MatchesGreedyOracleWithExactTies) {
  // Small integer grids produce many equal distances, exercising tie rules.
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.index(30);
    const std::size_t f = 1 + rng.index(3);
    Matrix x(n, f);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < f; ++c) x(r, c) = static_cast<double>(rng.index(3));
    const auto split = mtsg::kennard_stone_split(x, 0.5);
    ASSERT_EQ(split.train, oracle::kennard_stone(testutil::to_rows(x), mtsg::train_size_for(n, 0.5)));
  }
}

TEST(KennardStone, PartitionsRowsWithAscendingTestIndices) {
  Rng rng(3);
  const Matrix x = testutil::random_matrix(rng, 40, 3);
  const auto s = mtsg::kennard_stone_split(x, 2.0 / 3.0);
  EXPECT_TRUE(std::is_sorted(s.test.begin(), s.test.end()));
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::vector<std::size_t> want(40);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(sorted(all), want);
}

TEST(KennardStone, TwoThirdsOf396Gives264And132) {
  Rng rng(5);
  const auto s = mtsg::kennard_stone_split(testutil::random_matrix(rng, 396, 4), 2.0 / 3.0);
  EXPECT_EQ(s.train.size(), 264u);
  EXPECT_EQ(s.test.size(), 132u);
}

TEST(KennardStone, TwoRowsAtHalfRoundUpToTwoTrainingRows) {
  const auto s = mtsg::kennard_stone_split(Matrix{{0.0}, {1.0}}, 0.5);
  EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(s.test.empty());
}

TEST(KennardStone, FarthestPairSeedsTheSelection) {
  const Matrix x{{0.0}, {10.0}, {4.0}, {-3.0}, {6.0}};
  const auto s = mtsg::kennard_stone_split(x, 0.6);
  ASSERT_EQ(s.train.size(), 3u);
  EXPECT_EQ(s.train[0], 1u);  // 10 and -3 are the farthest pair
  EXPECT_EQ(s.train[1], 3u);
  EXPECT_EQ(s.train[2], 2u);  // 4 is 6 and 7 away, 6 only 4
}

TEST(KennardStone, IdenticalRowsFallBackToIndexOrder) {
  const Matrix x(6, 2, 1.5);
  const auto s = mtsg::kennard_stone_split(x, 0.5);
  EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(s.test, (std::vector<std::size_t>{3, 4, 5}));
}

TEST(KennardStone, RejectsBadInput) {
  EXPECT_THROW(mtsg::kennard_stone_split(Matrix{{1.0}}, 0.5), mtsg::DataError);
  EXPECT_THROW(mtsg::kennard_stone_split(Matrix(5, 1), 0.0), mtsg::ParameterError);
  EXPECT_THROW(mtsg::kennard_stone_split(Matrix(5, 1), 1.2), mtsg::ParameterError);
}

TEST(Csv, LoadsTargetsInRequestedOrderAndDropsIncompleteRows) {
  testutil::TempDir dir("csv");
  testutil::write_file(dir.file("d.csv"),
                       "\xEF\xBB\xBF" "a,b,\"t 1\",t2\n"
                       "1,2,3,4\n"
                       "5,NA,7,8\n"
                       "\n"
                       "9,10,11,?\n"
                       "13,14,15,16\n");
  const auto ds = mtsg::load_csv(dir.file("d.csv"), {"t2", "t 1"});
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.target_names, (std::vector<std::string>{"t2", "t 1"}));
  EXPECT_EQ(ds.dropped_rows, 2u);
  EXPECT_EQ(ds.x, (Matrix{{1, 2}, {13, 14}}));
  EXPECT_EQ(ds.y, (Matrix{{4, 3}, {16, 15}}));
}

TEST(Csv, ReportsFileLineAndColumnForBadCells) {
  testutil::TempDir dir("csvbad");
  testutil::write_file(dir.file("d.csv"), "a,b,t\n1,2,3\n4,oops,6\n");
  try {
    mtsg::load_csv(dir.file("d.csv"), {"t"});
    FAIL() << "expected DataError";
  } catch (const mtsg::DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("d.csv:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
  }
  EXPECT_THROW(mtsg::load_csv(dir.file("d.csv"), {"zzz"}), mtsg::DataError);
  testutil::write_file(dir.file("dup.csv"), "a,a,t\n1,2,3\n");
  EXPECT_THROW(mtsg::load_csv(dir.file("dup.csv"), {"t"}), mtsg::DataError);
  testutil::write_file(dir.file("ragged.csv"), "a,t\n1,2,3\n");
  EXPECT_THROW(mtsg::load_csv(dir.file("ragged.csv"), {"t"}), mtsg::DataError);
  EXPECT_THROW(mtsg::load_csv(dir.file("missing.csv"), {"t"}), mtsg::DataError);
}

TEST(Csv, FormatDoubleRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    double back = 0.0;
    ASSERT_TRUE(mtsg::csv::parse_double(mtsg::csv::format_double(v), back));
    ASSERT_EQ(back, v);
  }
}

TEST(SplitFile, RoundTripsAndValidates) {
  testutil::TempDir dir("split");
  Rng rng(2);
  const auto s = mtsg::kennard_stone_split(testutil::random_matrix(rng, 12, 2), 0.75);
  mtsg::write_split_csv(dir.file("s.csv"), s);
  const auto back = mtsg::read_split_csv(dir.file("s.csv"), 12);
  EXPECT_EQ(back.train, s.train);
  EXPECT_EQ(back.test, s.test);
  EXPECT_THROW(mtsg::read_split_csv(dir.file("s.csv"), 13), mtsg::DataError);
  EXPECT_THROW(mtsg::read_split_csv(dir.file("s.csv"), 5), mtsg::DataError);
  testutil::write_file(dir.file("bad.csv"), "index,role\n0,train\n1,validation\n");
  EXPECT_THROW(mtsg::read_split_csv(dir.file("bad.csv"), 2), mtsg::DataError);
  testutil::write_file(dir.file("twice.csv"), "index,role\n0,train\n0,test\n");
  EXPECT_THROW(mtsg::read_split_csv(dir.file("twice.csv"), 2), mtsg::DataError);
}

TEST(AutoScale, StandardisesTrainingColumnsAndInverts) {
  Rng rng(9);
  Matrix m = testutil::random_matrix(rng, 30, 3, -5, 20);
  for (std::size_t r = 0; r < 30; ++r) m(r, 2) = 4.0;  // constant column
  const auto p = mtsg::fit_autoscale(m);
  const Matrix z = mtsg::apply_autoscale(m, p);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto col = z.column(c);
    EXPECT_NEAR(oracle::mean(col), 0.0, 1e-12);
    EXPECT_NEAR(oracle::sd(col), 1.0, 1e-12);
  }
  EXPECT_EQ(p.stds[2], 1.0);
  EXPECT_EQ(z.column(2), std::vector<double>(30, 0.0));
  const Matrix back = mtsg::invert_autoscale(z, p);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(back(r, c), m(r, c), 1e-12);
  EXPECT_THROW(mtsg::apply_autoscale(Matrix(2, 2), p), mtsg::DataError);
  EXPECT_THROW(mtsg::fit_autoscale(Matrix(1, 2)), mtsg::DataError);
}
