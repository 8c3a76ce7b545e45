#include <gtest/gtest.h>

#include <sstream>

#include "otcpcc/io.hpp"

using namespace otcpcc;

TEST(ParsePoints, PlainRows) {
  const auto p = io::parse_points("0,0\n1, 2\n\n# comment\n3,4\n");
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.dim(), 2u);
  EXPECT_EQ(p.point(1)[1], 2.0);
  EXPECT_TRUE(p.has_uniform_weights());
}

TEST(ParsePoints, HeaderWithWeightColumn) {
  const auto p = io::parse_points("x,weight,y\n0,0.25,1\n2,0.75,3\n");
  EXPECT_EQ(p.dim(), 2u);
  EXPECT_EQ(p.weights(), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(p.point(1)[1], 3.0);
}

TEST(ParsePoints, ErrorsCarryLineNumbers) {
  try {
    io::parse_points("0,0\n1,x\n", "pts.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("pts.csv:2"), std::string::npos);
  }
  EXPECT_THROW(io::parse_points("0,0\n1\n"), ParseError);
  EXPECT_THROW(io::parse_points(""), ParseError);
  EXPECT_THROW(io::parse_points("x,weight\n0,0.2\n1,0.2\n"), DomainError);
}

TEST(ParseData, LabelsAndFeatures) {
  const auto d = io::parse_data("label,f0,f1\ncat,1,2\ndog,3,4\ncat,5,6\n");
  EXPECT_EQ(d.labels, (std::vector<std::string>{"cat", "dog", "cat"}));
  EXPECT_EQ(d.features, Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}}));
  const auto n = io::parse_data("cat,1\ndog,2\n");
  EXPECT_EQ(n.labels.size(), 2u);
  EXPECT_THROW(io::parse_data("cat\n"), ParseError);
  EXPECT_THROW(io::parse_data("cat,1\ndog,z\n"), ParseError);
}

TEST(PlanCsv, RoundTrip) {
  const FlowPlan p(2, 3, {{0, 0, 1.0 / 3}, {0, 1, 1.0 / 6}, {1, 1, 1.0 / 6}, {1, 2, 1.0 / 3}});
  std::ostringstream out;
  io::write_plan(out, p);
  EXPECT_EQ(out.str().substr(0, 9), "i,j,mass\n");
  EXPECT_EQ(io::parse_plan(out.str(), 2, 3), p);
  EXPECT_THROW(io::parse_plan("i,j,mass\n0,0\n", 1, 1), ParseError);
}

TEST(Format, TwelveSignificantDigits) {
  EXPECT_EQ(io::fmt(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(io::fmt(2.0), "2");
  EXPECT_EQ(io::fmt(123456789.123456789), "123456789.123");
}
