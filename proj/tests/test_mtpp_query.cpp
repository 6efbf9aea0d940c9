#include <gtest/gtest.h>

#include <cmath>

#include "lrq/error.hpp"
#include "lrq/mtpp_query.hpp"

using namespace lrq;

namespace {

MarkMask mask(int K, std::initializer_list<Mark> marks) {
  std::vector<Mark> v(marks);
  return mark_mask(K, v);
}

bool within(const EstimateSummary& a, double truth, double k = 4.0) {
  return std::abs(a.mean - truth) <= k * a.se + 1e-12;
}

bool agree(const EstimateSummary& a, const EstimateSummary& b, double k = 4.0) {
  return std::abs(a.mean - b.mean) <= k * std::hypot(a.se, b.se) + 1e-12;
}

HawkesExp random_hawkes(int K, std::uint64_t seed) {
  RngStream r(seed, 0);
  return HawkesExp::random(K, r, HawkesExp::dense_law());
}

}  // namespace

TEST(Schedule, Validation) {
  EXPECT_THROW(MarkSchedule({0.0}, {}), ConfigError);
  EXPECT_THROW(MarkSchedule({0.0, 1.0, 1.0}, {{1}, {1}}), ConfigError);
  EXPECT_THROW(MarkSchedule({0.0, 1.0}, {{1}, {1}}), ConfigError);
  MarkSchedule s({0.0, 1.0, 2.0}, {{1, 0}, {0, 1}});
  EXPECT_EQ(s.forbidden_at(0.0), nullptr);
  EXPECT_EQ((*s.forbidden_at(1.0))[0], 1);
  EXPECT_EQ((*s.forbidden_at(1.5))[1], 1);
  EXPECT_EQ(s.forbidden_at(2.5), nullptr);
  EXPECT_THROW(s.validate(3), ConfigError);
}

TEST(Proposal, EmptyForbiddenMatchesBase) {
  auto h = random_hawkes(3, 4);
  RestrictedProposal p(h, MarkSchedule::single(0.0, 5.0, mask(3, {})));
  EventSequence hist({{0.3, 1}, {0.9, 2}});
  auto a = marked_intensity(h, 1.4, hist);
  auto b = marked_intensity(p, 1.4, hist);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a[k], b[k]);
}

TEST(Proposal, AllForbiddenGivesNoEvents) {
  auto h = random_hawkes(3, 5);
  RestrictedProposal p(h, MarkSchedule::single(0.0, 3.0, full_mask(3)));
  for (std::uint64_t i = 0; i < 50; ++i) {
    RngStream r(6, i);
    auto seq = thinning_sample(p, 0.0, 3.0, EventSequence(), r);
    EXPECT_EQ(seq.size(), 0u);
  }
}

TEST(Proposal, PoissonRestrictedCounts) {
  PoissonMtpp m({1.0, 2.0});
  RestrictedProposal p(m, MarkSchedule::single(0.0, 1.0, mask(2, {0})));
  const std::size_t n = 10000;
  std::vector<double> counts(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream r(7, i);
    auto seq = thinning_sample(p, 0.0, 1.0, EventSequence(), r);
    for (const auto& e : seq.events) {
      ASSERT_EQ(e.mark, 1);
      counts[i] += 1.0;
    }
  }
  EXPECT_TRUE(within(mc_accumulate(counts), 2.0));
}

TEST(RestrictedIs, PoissonDeterministic) {
  PoissonMtpp m({1.0, 2.0});
  auto s = restricted_mark_is_estimate(m, MarkSchedule::single(0.0, 2.0, mask(2, {0})), 100, RngStream(1, 0));
  EXPECT_NEAR(s.mean, std::exp(-2.0), 1e-12);
  EXPECT_NEAR(s.var, 0.0, 1e-24);
}

TEST(RestrictedIs, PiecewiseSchedulePoisson) {
  PoissonMtpp m({1.0, 2.0});
  MarkSchedule sched({0.0, 1.0, 1.5}, {mask(2, {0}), mask(2, {1})});
  auto s = restricted_mark_is_estimate(m, sched, 50, RngStream(2, 0));
  EXPECT_NEAR(s.mean, std::exp(-1.0 - 1.0), 1e-12);
}

TEST(RestrictedIs, NothingForbiddenIsOne) {
  auto h = random_hawkes(3, 8);
  auto s = restricted_mark_is_estimate(h, MarkSchedule::single(0.0, 2.0, mask(3, {})), 200, RngStream(3, 0));
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.var, 0.0);
}

TEST(RestrictedIs, HawkesMatchesNaive) {
  auto h = random_hawkes(3, 9);
  const double T = 2.0;
  const std::size_t n = 100000;
  auto is = restricted_mark_is_estimate(h, MarkSchedule::single(0.0, T, mask(3, {0})), n, RngStream(10, 0));
  auto naive = naive_query_estimate(
      h,
      [](const EventSequence& s) {
        for (const auto& e : s.events)
          if (e.mark == 0) return false;
        return true;
      },
      T, n, RngStream(11, 0));
  EXPECT_TRUE(agree(is, naive)) << is.mean << " vs " << naive.mean;
  EXPECT_LT(is.var, naive.var);
}

TEST(Naive, Examples) {
  PoissonMtpp one({1.0});
  auto always = naive_query_estimate(one, [](const EventSequence&) { return true; }, 1.0, 100, RngStream(1, 1));
  EXPECT_DOUBLE_EQ(always.mean, 1.0);
  auto none = naive_query_estimate(one, [](const EventSequence& s) { return s.size() == 0; }, 1.0, 100000,
                                   RngStream(1, 2));
  EXPECT_TRUE(within(none, std::exp(-1.0)));
  PoissonMtpp two({1.0, 2.0});
  auto first = naive_query_estimate(
      two, [](const EventSequence& s) { return !s.events.empty() && s.events[0].mark == 0; }, 10.0, 100000,
      RngStream(1, 3));
  EXPECT_TRUE(within(first, 1.0 / 3.0));
}

TEST(HittingCdf, AllMarksIsNextEventCdf) {
  auto h = random_hawkes(3, 12);
  EventSequence hist({{0.2, 0}, {0.7, 2}});
  MtppEstimateOptions o;
  o.history = hist;
  std::vector<double> grid{0.7, 1.0, 2.0, 4.0};
  auto est = hitting_time_cdf_estimate(h, full_mask(3), grid, 20, RngStream(4, 0), o);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_NEAR(est[j].mean, next_event_cdf(h, hist, grid[j]), 1e-12);
    EXPECT_NEAR(est[j].var, 0.0, 1e-24);
  }
}

TEST(HittingCdf, PoissonConstantRate) {
  PoissonMtpp m({1.0, 3.0});
  auto est = hitting_time_cdf_estimate(m, mask(2, {0}), {1.0}, 50, RngStream(5, 0));
  EXPECT_NEAR(est[0].mean, 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_NEAR(est[0].var, 0.0, 1e-24);
}

TEST(HittingCdf, HawkesMatchesNaiveWithLowerVariance) {
  auto h = random_hawkes(4, 13);
  std::vector<double> grid{0.5, 1.0, 2.0, 3.0};
  const auto a = mask(4, {1});
  auto is = hitting_time_cdf_estimate(h, a, grid, 50000, RngStream(14, 0));
  auto naive = naive_hitting_cdf(h, a, grid, 50000, RngStream(15, 0));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    EXPECT_TRUE(agree(is[j], naive[j])) << grid[j];
    EXPECT_LT(is[j].var, naive[j].var) << grid[j];
  }
}

TEST(HittingCdf, Validation) {
  PoissonMtpp m({1.0});
  EXPECT_THROW(hitting_time_cdf_estimate(m, mask(1, {}), {1.0}, 10, RngStream(1, 0)), ConfigError);
  EXPECT_THROW(hitting_time_cdf_estimate(m, mask(1, {0}), {}, 10, RngStream(1, 0)), ConfigError);
  EXPECT_THROW(hitting_time_cdf_estimate(m, mask(1, {0}), {2.0, 1.0}, 10, RngStream(1, 0)), ConfigError);
}

TEST(NthMark, AllMarksIsOne) {
  auto h = random_hawkes(3, 16);
  auto s = nth_mark_estimate(h, full_mask(3), 3, 200, RngStream(6, 0));
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.var, 0.0);
}

TEST(NthMark, PoissonRateRatio) {
  PoissonMtpp m({1.0, 2.0});
  for (int idx : {1, 4}) {
    NthMarkOptions o;
    auto direct = nth_mark_estimate(m, mask(2, {0}), idx, 100000, RngStream(17, idx), o);
    EXPECT_TRUE(within(direct, 1.0 / 3.0)) << direct.mean;
    o.form = NthMarkForm::conditional;
    auto cond = nth_mark_estimate(m, mask(2, {0}), idx, 100, RngStream(18, idx), o);
    EXPECT_NEAR(cond.mean, 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(cond.var, 0.0, 1e-18);
  }
}

TEST(NthMark, FormsAreComplementary) {
  auto h = random_hawkes(3, 19);
  NthMarkOptions o;
  auto direct = nth_mark_estimate(h, mask(3, {0, 2}), 3, 50000, RngStream(20, 0), o);
  o.form = NthMarkForm::complement;
  auto comp = nth_mark_estimate(h, mask(3, {1}), 3, 50000, RngStream(21, 0), o);
  EXPECT_NEAR(direct.mean + comp.mean, 1.0, 4.0 * std::hypot(direct.se, comp.se));
  o.form = NthMarkForm::conditional;
  auto cond = nth_mark_estimate(h, mask(3, {0, 2}), 3, 2000, RngStream(22, 0), o);
  EXPECT_TRUE(agree(direct, cond));
}

TEST(NthMark, Validation) {
  PoissonMtpp m({1.0});
  EXPECT_THROW(nth_mark_estimate(m, mask(1, {0}), 0, 10, RngStream(1, 0)), ConfigError);
  PoissonMtpp silent({0.0, 0.0});
  NthMarkOptions o;
  o.horizon = 1.0;
  o.max_extensions = 3;
  EXPECT_THROW(nth_mark_estimate(silent, mask(2, {0}), 2, 2, RngStream(1, 0), o), NumericError);
}

TEST(ABeforeB, PoissonCompetingExponentials) {
  PoissonMtpp m({1.0, 2.0});
  BeforeOptions o;
  o.epsilon = 1e-6;
  auto r = a_before_b_estimate(m, mask(2, {0}), mask(2, {1}), 20, RngStream(7, 0), o);
  EXPECT_NEAR(r.estimate.mean, 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(r.estimate.var, 0.0, 1e-18);
  EXPECT_LE(r.max_gap, 1e-6);
  EXPECT_EQ(r.capped, 0u);
  EXPECT_EQ(r.estimate.extra.at("biased"), 1.0);
  EXPECT_LE(r.lower.mean, r.estimate.mean);
  EXPECT_GE(r.upper.mean, r.estimate.mean);
}

TEST(ABeforeB, ComplementIsNextMark) {
  auto h = random_hawkes(3, 23);
  EventSequence hist({{0.4, 1}, {1.1, 0}});
  BeforeOptions o;
  o.history = hist;
  o.epsilon = 1e-8;
  const auto a = mask(3, {0, 1});
  auto r = a_before_b_estimate(h, a, mask(3, {2}), 10, RngStream(8, 0), o);
  EXPECT_NEAR(r.estimate.var, 0.0, 1e-16);
  EXPECT_NEAR(r.estimate.mean, next_mark_prob(h, hist, a, hist.window_end, kInf, 4000), 1e-5);
}

TEST(ABeforeB, SwappedMidpointsSumToOne) {
  auto h = random_hawkes(4, 24);
  BeforeOptions o;
  o.epsilon = 0.01;
  const auto a = mask(4, {0}), b = mask(4, {2, 3});
  auto ab = a_before_b_estimate(h, a, b, 2000, RngStream(9, 0), o);
  auto ba = a_before_b_estimate(h, b, a, 2000, RngStream(9, 0), o);
  EXPECT_NEAR(ab.estimate.mean + ba.estimate.mean, 1.0, 2 * o.epsilon);
  EXPECT_LE(ab.max_gap, o.epsilon);
}

TEST(ABeforeB, MatchesNaive) {
  auto h = random_hawkes(3, 25);
  BeforeOptions o;
  o.epsilon = 1e-4;
  const auto a = mask(3, {0}), b = mask(3, {1});
  auto r = a_before_b_estimate(h, a, b, 5000, RngStream(26, 0), o);
  auto naive = naive_query_estimate(
      h,
      [](const EventSequence& s) {
        for (const auto& e : s.events) {
          if (e.mark == 0) return true;
          if (e.mark == 1) return false;
        }
        return false;
      },
      60.0, 20000, RngStream(27, 0));
  EXPECT_TRUE(agree(r.estimate, naive)) << r.estimate.mean << " vs " << naive.mean;
}

TEST(ABeforeB, FixedHorizonAndCap) {
  PoissonMtpp m({1.0, 2.0, 0.5});
  BeforeOptions o;
  o.tau = 0.5;
  auto r = a_before_b_estimate(m, mask(3, {0}), mask(3, {1}), 5, RngStream(1, 0), o);
  const double lower = (1.0 / 3.0) * (1.0 - std::exp(-1.5));
  EXPECT_NEAR(r.lower.mean, lower, 1e-9);
  EXPECT_NEAR(r.upper.mean, lower + std::exp(-1.5), 1e-9);
  o.tau = 0.0;
  o.epsilon = 1e-3;
  o.tau_cap = 0.5;
  auto capped = a_before_b_estimate(m, mask(3, {0}), mask(3, {1}), 5, RngStream(1, 0), o);
  EXPECT_EQ(capped.capped, 5u);
  EXPECT_THROW(a_before_b_estimate(m, mask(3, {0}), mask(3, {0, 1}), 5, RngStream(1, 0)), ConfigError);
}

TEST(Variance, BernoulliBoundCheck) {
  EXPECT_NO_THROW(check_bounded_variance(make_summary(10, 0.5, 0.25)));
  EXPECT_THROW(check_bounded_variance(make_summary(10, 0.1, 0.2)), NumericError);
  std::vector<double> xs{0.0, 1.0, 1.0, 0.0, 1.0};
  EXPECT_NO_THROW(check_bounded_variance(mc_accumulate(xs)));
}

TEST(Determinism, WorkerCountInvariant) {
  auto h = random_hawkes(3, 28);
  MtppEstimateOptions o1, o4;
  o1.workers = 1;
  o4.workers = 4;
  const auto a = mask(3, {2});
  auto x = hitting_time_cdf_estimate(h, a, {1.0, 2.0}, 500, RngStream(29, 0), o1);
  auto y = hitting_time_cdf_estimate(h, a, {1.0, 2.0}, 500, RngStream(29, 0), o4);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(x[j].mean, y[j].mean);
    EXPECT_EQ(x[j].var, y[j].var);
  }
}
