#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "lrq/error.hpp"
#include "lrq/integrate.hpp"
#include "lrq/parallel.hpp"
#include "lrq/rng.hpp"
#include "lrq/stats.hpp"

using namespace lrq;

TEST(Accumulate, ConstantSamples) {
  std::vector<double> x{1, 1, 1, 1};
  auto s = mc_accumulate(x);
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.var, 0.0);
}

TEST(Accumulate, TwoPoint) {
  std::vector<double> x{0, 1};
  auto s = mc_accumulate(x);
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.var, 0.5);
  EXPECT_NEAR(s.se, std::sqrt(0.25), 1e-15);
}

TEST(Accumulate, HandComputed) {
  std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  auto s = mc_accumulate(x);
  EXPECT_NEAR(s.mean, 5.0, 1e-15);
  EXPECT_NEAR(s.var, 32.0 / 7.0, 1e-14);
}

TEST(Accumulate, EmptyIsError) {
  std::vector<double> x;
  EXPECT_THROW(mc_accumulate(x), ConfigError);
}

TEST(Accumulate, SingleSampleFlagged) {
  std::vector<double> x{0.3};
  auto s = mc_accumulate(x);
  EXPECT_EQ(s.var, 0.0);
  EXPECT_EQ(s.extra.at("single_sample"), 1.0);
}

TEST(Accumulate, MatchesTwoPassOnMillionUniforms) {
  RngStream rng(7, 0);
  std::vector<double> x(1000000);
  for (auto& v : x) v = rng.uniform();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(x.size() - 1);
  auto s = mc_accumulate(x);
  EXPECT_NEAR(s.mean / mean, 1.0, 1e-12);
  EXPECT_NEAR(s.var / var, 1.0, 1e-12);
}

TEST(Accumulate, MergeEqualsSequential) {
  RngStream rng(3, 1);
  Accumulator all, left, right;
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal();
    all.add(v);
    (i < 400 ? left : right).add(v);
  }
  left.merge(right);
  EXPECT_NEAR(left.mean(), all.mean(), 1e-13);
  EXPECT_NEAR(left.variance(), all.variance(), 1e-12);
}

TEST(Trapezoid, ZeroIntegrand) {
  Grid g({0.0, 0.3, 1.0});
  std::vector<double> v{0, 0, 0};
  EXPECT_EQ(trapezoid(v, g), 0.0);
}

TEST(Trapezoid, LinearExact) {
  Grid g({0.0, 1.0, 2.0});
  std::vector<double> v{0, 1, 2};
  EXPECT_DOUBLE_EQ(trapezoid(v, g), 2.0);
}

TEST(Trapezoid, QuadraticTwoPanels) {
  Grid g({0.0, 0.5, 1.0});
  std::vector<double> v{0, 0.25, 1};
  EXPECT_DOUBLE_EQ(trapezoid(v, g), 0.375);
}

TEST(Trapezoid, AffineExactOnIrregularGrid) {
  Grid g({0.1, 0.17, 0.9, 1.3, 2.75});
  std::vector<double> v;
  for (double t : g.points()) v.push_back(3.0 * t - 1.0);
  const double exact = 1.5 * (2.75 * 2.75 - 0.01) - (2.75 - 0.1);
  EXPECT_NEAR(trapezoid(v, g), exact, 1e-12);
}

TEST(Trapezoid, LengthMismatch) {
  Grid g({0.0, 1.0});
  std::vector<double> v{0, 1, 2};
  EXPECT_THROW(trapezoid(v, g), ConfigError);
}

TEST(GridTest, RejectsBadPoints) {
  EXPECT_THROW(Grid({}), ConfigError);
  EXPECT_THROW(Grid({1.0, 1.0}), ConfigError);
  EXPECT_THROW(Grid({-0.5, 1.0}), ConfigError);
}

TEST(Efficiency, Ratios) {
  EstimateSummary a, b;
  a.var = 0.01;
  b.var = 1.0;
  EXPECT_DOUBLE_EQ(relative_efficiency(a, b), 100.0);
  a.var = 1.0;
  EXPECT_DOUBLE_EQ(relative_efficiency(a, b), 1.0);
}

TEST(Efficiency, ZeroVarianceIsInfinite) {
  EstimateSummary is, naive;
  naive.var = 0.25;
  EXPECT_EQ(relative_efficiency(is, naive), kInf);
  naive.var = 0.0;
  EXPECT_THROW(relative_efficiency(is, naive), NumericError);
}

TEST(Rng, Reproducible) {
  RngStream a(11, 5), b(11, 5), c(11, 6);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs |= x != c();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformMoments) {
  RngStream r(1, 2);
  Accumulator acc;
  for (int i = 0; i < 200000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    acc.add(u);
  }
  EXPECT_NEAR(acc.mean(), 0.5, 4 * std::sqrt(1.0 / 12 / 200000));
  EXPECT_NEAR(acc.variance(), 1.0 / 12, 2e-3);
}

TEST(Rng, NormalMoments) {
  RngStream r(9, 0);
  Accumulator acc;
  for (int i = 0; i < 200000; ++i) acc.add(r.normal());
  EXPECT_NEAR(acc.mean(), 0.0, 4 * std::sqrt(1.0 / 200000));
  EXPECT_NEAR(acc.variance(), 1.0, 0.02);
}

TEST(Rng, SubstreamsIndependentOfOrder) {
  RngStream root(4, 4);
  auto s5 = root.substream(5);
  auto s5b = root.substream(5);
  EXPECT_EQ(s5(), s5b());
  EXPECT_NE(root.substream(6)(), root.substream(5)());
}

TEST(Rng, DrawIndexSkipsZeros) {
  RngStream r(2, 2);
  std::vector<double> w{0.0, 1.0, 0.0, 3.0};
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 40000; ++i) ++counts[draw_index(w, 4.0, r)];
  EXPECT_EQ(counts[0], 0);
  EXPECT_EQ(counts[2], 0);
  EXPECT_NEAR(counts[3] / 40000.0, 0.75, 0.01);
}

TEST(Parallel, SampleMeanIndependentOfWorkers) {
  RngStream root(8, 8);
  auto f = [&](std::size_t i) { return root.substream(i).normal(); };
  auto a = sample_mean(10001, 1, f);
  auto b = sample_mean(10001, 8, f);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.var, b.var);
}

TEST(Parallel, RethrowsWorkerFailure) {
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 57) throw NumericError("boom");
                            }),
               NumericError);
}
