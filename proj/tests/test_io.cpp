#include <gtest/gtest.h>

#include <sstream>

#include "sdridge/io.hpp"
#include "sdridge/ridge.hpp"
#include "support.hpp"

using namespace sdridge;
using namespace sdtest;

TEST(ReadCsv, SmallNumericTable) {
  std::istringstream in("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset d = read_csv(in);
  EXPECT_EQ(d.n(), 3);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.X(1, 1), 5.0);
  EXPECT_EQ(d.y(2), 9.0);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
}

TEST(ReadCsv, TargetByNameOrIndex) {
  const std::string csv = "a,t,b\n1,2,3\n4,5,6\n";
  std::istringstream in1(csv);
  const Dataset byname = read_csv(in1, {"t", true});
  EXPECT_EQ(byname.y(1), 5.0);
  EXPECT_EQ(byname.X(1, 1), 6.0);
  std::istringstream in2(csv);
  EXPECT_EQ(read_csv(in2, {"0", true}).y(0), 1.0);
  std::istringstream in3(csv);
  EXPECT_THROW(read_csv(in3, {"zzz", true}), ParameterError);
}

TEST(ReadCsv, RowWithMissingCellIsDropped) {
  std::istringstream in("a,b,y\n1,2,3\n4,NA,6\n7,8,9\n1,,2\n");
  const Dataset d = read_csv(in);
  EXPECT_EQ(d.n(), 2);
  EXPECT_EQ(d.X(1, 0), 7.0);
}

TEST(ReadCsv, NonNumericCellReportsLineAndColumn) {
  std::istringstream in("a,b,y\n1,2,3\n4,x5,6\n");
  try {
    read_csv(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  }
}

TEST(ReadCsv, EmptyInputsAreDataErrors) {
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), DataError);
  std::istringstream all_missing("a,y\nNA,1\n2,?\n");
  EXPECT_THROW(read_csv(all_missing), DataError);
  std::istringstream ragged("a,y\n1,2,3\n");
  EXPECT_THROW(read_csv(ragged), ParseError);
}

TEST(ReadCsv, HeaderlessInput) {
  std::istringstream in("1,2\n3,4\n");
  const Dataset d = read_csv(in, {"", false});
  EXPECT_EQ(d.n(), 2);
  EXPECT_EQ(d.y(1), 4.0);
}

TEST(WriteCsv, RoundTripIsBitExact) {
  Gen g(91);
  const Dataset d(gaussian_matrix(g, 25, 7) * 1e3, gaussian_vector(g, 25) * 1e-7);
  std::stringstream ss;
  write_csv(ss, d);
  const Dataset back = read_csv(ss);
  ASSERT_EQ(back.n(), 25);
  ASSERT_EQ(back.p(), 7);
  EXPECT_TRUE((back.X.array() == d.X.array()).all());
  EXPECT_TRUE((back.y.array() == d.y.array()).all());
}

TEST(Standardize, UsesTrainStatistics) {
  // column 0 on train: mean 5, sample std 2
  const MatrixXd xtr = (MatrixXd(3, 2) << 3, 1, 5, 2, 7, 3).finished();
  const Dataset train(xtr, (VectorXd(3) << 1, 2, 3).finished());
  const Dataset test((MatrixXd(1, 2) << 7, 10).finished(), (VectorXd(1) << 5).finished());
  const Standardized s = standardize(train, test);
  EXPECT_DOUBLE_EQ(s.test.X(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.train.X(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.test.X(0, 1), 8.0);
  EXPECT_DOUBLE_EQ(s.test.y(0), 3.0);
  EXPECT_NEAR(s.train.X.colwise().mean().norm(), 0.0, 1e-15);
}

TEST(Standardize, DropsConstantColumnsAndRejectsAllConstant) {
  const MatrixXd xtr = (MatrixXd(3, 2) << 1, 4, 2, 4, 3, 4).finished();
  const Dataset train(xtr, (VectorXd(3) << 1, 2, 4).finished());
  const Standardized s = standardize(train, train);
  EXPECT_EQ(s.train.p(), 1);
  EXPECT_EQ(s.stats.dropped_columns, (std::vector<std::size_t>{1}));
  const Dataset flat(MatrixXd::Constant(3, 2, 1.0), (VectorXd(3) << 1, 2, 4).finished());
  EXPECT_THROW(standardize(flat, flat), DataError);
}

TEST(Standardize, TestRowsDoNotLeakIntoFit) {
  Gen g(92);
  const Dataset train(gaussian_matrix(g, 30, 4), gaussian_vector(g, 30));
  const Dataset test(gaussian_matrix(g, 10, 4) * 5.0, gaussian_vector(g, 10));
  Dataset other = test;
  other.X = gaussian_matrix(g, 10, 4) * 100.0;
  other.y = gaussian_vector(g, 10) * 50.0;
  const Standardized a = standardize(train, test);
  const Standardized b = standardize(train, other);
  EXPECT_TRUE((a.train.X.array() == b.train.X.array()).all());
  EXPECT_TRUE((fit_ridge(a.train, 0.3).beta.array() == fit_ridge(b.train, 0.3).beta.array()).all());
}

TEST(Split, SequentialAndSeededRandom) {
  Gen g(93);
  const Dataset d(gaussian_matrix(g, 10, 2), gaussian_vector(g, 10));
  const auto [tr, te] = split(d, 0.7, SplitMode::sequential);
  EXPECT_EQ(tr.n(), 7);
  EXPECT_EQ(te.n(), 3);
  EXPECT_EQ(te.y(0), d.y(7));
  const auto r1 = split(d, 0.7, SplitMode::random, 4);
  const auto r2 = split(d, 0.7, SplitMode::random, 4);
  EXPECT_TRUE((r1.first.y.array() == r2.first.y.array()).all());
  EXPECT_THROW(split(d, 1.0, SplitMode::random), ParameterError);
}
