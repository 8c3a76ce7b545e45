#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "otcpcc/bench.hpp"

using namespace otcpcc;

namespace {

std::string csv_without_seconds(const std::vector<BenchRecord>& recs) {
  std::ostringstream out;
  for (const auto& r : recs) out << r.method << ',' << r.n << ',' << r.seed << ',' << io::fmt(r.value) << ',' << io::fmt(r.abs_error) << '\n';
  return out.str();
}

}  // namespace

TEST(Synthetic, ZeroSpreadSitsOnTheMean) {
  SyntheticSpec spec;
  spec.dim = 3;
  spec.stddev = 0.0;
  const auto [a, b] = generate_synthetic(spec, 5, 1);
  for (double x : a.points().data()) EXPECT_EQ(x, 1.0);
  for (double x : b.points().data()) EXPECT_EQ(x, 4.0);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.scenario = Scenario::mixture;
  spec.dim = 4;
  const auto [a1, b1] = generate_synthetic(spec, 30, 9);
  const auto [a2, b2] = generate_synthetic(spec, 30, 9);
  const auto [a3, b3] = generate_synthetic(spec, 30, 10);
  EXPECT_EQ(a1.points(), a2.points());
  EXPECT_EQ(b1.points(), b2.points());
  EXPECT_NE(a1.points(), a3.points());
}

TEST(Synthetic, GaussianSampleMeans) {
  SyntheticSpec spec;
  spec.dim = 8;
  const auto [a, b] = generate_synthetic(spec, 10000, 3);
  const auto ma = a.mean();
  const auto mb = b.mean();
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_NEAR(ma[k], 1.0, 0.05);
    EXPECT_NEAR(mb[k], 4.0, 0.05);
  }
}

TEST(Synthetic, MixtureComponents) {
  SyntheticSpec spec;
  spec.scenario = Scenario::mixture;
  spec.dim = 1;
  spec.stddev = 0.0;
  const auto [a, b] = generate_synthetic(spec, 2000, 4);
  std::size_t high = 0;
  for (double x : a.points().data()) {
    EXPECT_TRUE(x == 0.0 || x == 5.0);
    high += x == 5.0;
  }
  EXPECT_NEAR(static_cast<double>(high) / 2000.0, 0.5, 0.05);
  for (double x : b.points().data()) EXPECT_TRUE(x == 2.0 || x == 3.0);
  spec.stddev = NAN;
  EXPECT_THROW(generate_synthetic(spec, 3, 1), DomainError);
}

TEST(BenchTiming, SmallRunsAreFastAndShaped) {
  BenchOptions opt;
  const std::vector<Method> all(kAllMethods.begin(), kAllMethods.end());
  const auto recs = bench_timing(all, {10, 20}, 2, 5, opt);
  ASSERT_EQ(recs.size(), 14u);
  for (const auto& r : recs) {
    EXPECT_FALSE(r.timed_out);
    EXPECT_GE(r.seconds, 0.0);
    EXPECT_LT(r.seconds, 1.0);
    EXPECT_TRUE(std::isnan(r.abs_error));
  }
  EXPECT_THROW(bench_timing({}, {10}, 1, 0), DomainError);
}

TEST(BenchTiming, BudgetExceededIsFlaggedAndLargerSizesSkipped) {
  BenchOptions opt;
  opt.dim = 4;
  opt.budget_seconds = 0.0;
  const auto recs = bench_timing({Method::emd}, {200, 400}, 1, 0, opt);
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) {
    EXPECT_TRUE(r.timed_out);
    EXPECT_TRUE(std::isnan(r.value));
  }
}

TEST(BenchError, SelfErrorAndLowerBound) {
  BenchOptions opt;
  opt.dim = 2;
  opt.scenario = Scenario::mixture;
  const std::vector<Method> all(kAllMethods.begin(), kAllMethods.end());
  const auto recs = bench_error(all, {30, 60}, {1, 2, 3}, opt);
  ASSERT_EQ(recs.size(), 2u * 3u * 7u);
  std::map<std::pair<std::size_t, std::uint64_t>, double> l2;
  for (const auto& r : recs)
    if (r.method == "l2") l2[{r.n, r.seed}] = r.value;
  for (const auto& r : recs) {
    if (r.method == "emd") {
      EXPECT_LE(r.abs_error, 1e-9);
    }
    if (r.method != "swd") {
      EXPECT_GE(r.value, l2.at({r.n, r.seed}) - 1e-9) << r.method;
    }
  }
}

TEST(BenchError, ReproducibleAndAddsL2) {
  BenchOptions opt;
  opt.dim = 2;
  opt.threads = 3;
  const auto a = bench_error({Method::fastft, Method::swd}, {40}, {7, 8, 9}, opt);
  opt.threads = 1;
  const auto b = bench_error({Method::fastft, Method::swd}, {40}, {7, 8, 9}, opt);
  EXPECT_EQ(csv_without_seconds(a), csv_without_seconds(b));
  std::size_t l2 = 0;
  for (const auto& r : a) l2 += r.method == "l2";
  EXPECT_EQ(l2, 3u);
}

TEST(BenchError, CentroidErrorSmallerOnGaussiansThanMixtures) {
  BenchOptions opt;
  opt.dim = 2;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  auto mean_l2_error = [&](Scenario sc) {
    opt.scenario = sc;
    double total = 0.0;
    int n = 0;
    for (const auto& r : bench_error({Method::l2}, {200}, seeds, opt)) {
      if (r.method != "l2") continue;
      total += r.abs_error;
      ++n;
    }
    return total / n;
  };
  EXPECT_LT(mean_l2_error(Scenario::gaussian), mean_l2_error(Scenario::mixture));
}

TEST(BenchCsv, HeaderAndMetadata) {
  std::ostringstream out;
  write_bench_csv(out, {{"fastft", 10, 3, 0.5, 1.25, NAN, false}}, {{"d", "2"}});
  EXPECT_EQ(out.str(), "# d: 2\nmethod,n,seed,seconds,value,abs_error\nfastft,10,3,0.5,1.25,nan\n");
}

TEST(LogLogSlope, PowerLaws) {
  const std::vector<double> x{128, 256, 512, 1024};
  std::vector<double> lin, quad;
  for (double v : x) {
    lin.push_back(3e-6 * v);
    quad.push_back(1e-9 * v * v);
  }
  EXPECT_NEAR(loglog_slope(x, lin), 1.0, 1e-12);
  EXPECT_NEAR(loglog_slope(x, quad), 2.0, 1e-12);
}
