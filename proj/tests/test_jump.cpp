#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lrq/error.hpp"
#include "lrq/jump.hpp"

using namespace lrq;

namespace {

/// Scalar process with constant drift, scale and jump rate; jumps add +1.
class ConstProcess final : public JumpProcess {
 public:
  ConstProcess(double mu, double sigma, double lambda) : mu_(mu), sigma_(sigma), lambda_(lambda) {}
  std::string name() const override { return "const"; }
  int dim() const override { return 1; }
  std::vector<double> x0() const override { return {0.0}; }
  bool pure_jump() const override { return mu_ == 0.0 && sigma_ == 0.0; }
  void drift(const PathState&, std::span<double> out) const override { out[0] = mu_; }
  void diffusion(const PathState&, std::span<double> out) const override { out[0] = sigma_; }
  double jump_rate(const PathState&) const override { return lambda_; }
  double dominating_rate(const PathState&, double) const override { return lambda_; }
  std::vector<double> sample_mark(const PathState&, RngStream&) const override { return {1.0}; }
  std::vector<double> increment(const PathState&, std::span<const double> m) const override { return {m[0]}; }

 private:
  double mu_, sigma_, lambda_;
};

Path hand_path(const std::vector<double>& xs) {
  Path p;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    p.times.push_back(static_cast<double>(i));
    p.states.push_back({xs[i]});
    p.jumped.push_back(0);
  }
  return p;
}

Region vertex(int v) {
  const int vs[] = {v};
  return Region::vertices(vs);
}

}  // namespace

TEST(Region, BoxesAndMasses) {
  const Region r = Region::at_least(1.0);
  const double in[] = {1.0}, out[] = {0.999};
  EXPECT_TRUE(r.contains(in));
  EXPECT_FALSE(r.contains(out));
  const Region b = Region::below(1.0);
  EXPECT_FALSE(b.contains(in));
  EXPECT_TRUE(b.contains(out));
  EXPECT_TRUE(r.intersect(b).empty());
  const double mean[] = {0.0}, scale[] = {1.0};
  EXPECT_NEAR(r.gaussian_mass(mean, scale), 1.0 - normal_cdf(1.0), 1e-15);
  EXPECT_NEAR(r.unite(b).gaussian_mass(mean, scale), 1.0, 1e-15);
  const double zero[] = {0.0};
  EXPECT_EQ(r.gaussian_mass(in, zero), 1.0);
  EXPECT_EQ(r.gaussian_mass(out, zero), 0.0);
  EXPECT_TRUE(Region{}.empty());
}

TEST(Quadrature, GaussRules) {
  std::vector<double> x, w;
  gauss_hermite(20, x, w);
  double m2 = 0, m4 = 0, tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    tot += w[i];
    m2 += w[i] * x[i] * x[i];
    m4 += w[i] * std::pow(x[i], 4);
  }
  EXPECT_NEAR(tot, 1.0, 1e-12);
  EXPECT_NEAR(m2, 1.0, 1e-12);
  EXPECT_NEAR(m4, 3.0, 1e-11);
  gauss_legendre01(10, x, w);
  double i2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) i2 += w[i] * x[i] * x[i];
  EXPECT_NEAR(i2, 1.0 / 3.0, 1e-14);
}

TEST(EulerStep, ZeroProcessIsConstant) {
  ConstProcess p(0, 0, 0);
  RngStream rng(1, 0);
  PathState s;
  s.x = {2.5};
  for (int i = 0; i < 10; ++i) euler_step(p, s, 0.01, rng);
  EXPECT_EQ(s.x[0], 2.5);
}

TEST(EulerStep, DeterministicDrift) {
  ConstProcess p(1, 0, 0);
  RngStream rng(1, 0);
  PathState s;
  s.x = {0.0};
  euler_step(p, s, 0.01, rng);
  EXPECT_EQ(s.x[0], 0.01);
}

TEST(EulerStep, JumpFrequency) {
  ConstProcess p(0, 0, 1.0);
  RngStream rng(7, 0);
  PathState s;
  s.x = {0.0};
  const int steps = 1000000;
  int jumps = 0;
  for (int i = 0; i < steps; ++i) jumps += euler_step(p, s, 0.01, rng).jumped ? 1 : 0;
  const double rate = static_cast<double>(jumps) / steps;
  EXPECT_NEAR(rate, 0.01, 4 * std::sqrt(0.01 * 0.99 / steps));
}

TEST(EulerStep, CoarseStepIsAnError) {
  ConstProcess p(0, 0, 200.0);
  RngStream rng(1, 0);
  PathState s;
  s.x = {0.0};
  try {
    euler_step(p, s, 0.01, rng);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_STREQ(e.what(), "step too coarse for intensity");
  }
}

TEST(SimulatePath, MertonDegeneratesToGrowth) {
  MertonParams mp;
  mp.sigma = mp.delta = mp.lambda = 0.0;
  MertonProcess p(mp);
  RngStream rng(3, 0);
  const auto path = simulate_path(p, 1.0, 0.01, rng);
  ASSERT_EQ(path.times.size(), 101u);
  EXPECT_NEAR(path.states.back()[0], std::exp(mp.r), 1e-5);
  EXPECT_NEAR(path.states.back()[0], std::pow(1 + mp.r * 0.01, 100), 1e-12);
}

TEST(SimulatePath, CtmcHoldingTimesAreExponential) {
  CtmcParams cp;
  RngStream seed(11, 0);
  const CtmcProcess p = CtmcProcess::random(cp, seed);
  const int n = 10000;
  std::vector<double> hold;
  for (int i = 0; i < n; ++i) {
    RngStream rng(12, static_cast<std::uint64_t>(i));
    const auto path = simulate_path(p, 50.0, 0.0, rng);
    ASSERT_GE(path.times.size(), 2u);
    hold.push_back(path.times[1]);
  }
  std::sort(hold.begin(), hold.end());
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double f = 1 - std::exp(-cp.rate * hold[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LT(ks * std::sqrt(static_cast<double>(n)), 1.949);  // 0.999 level
}

TEST(SimulatePath, ExactModeNeedsPureJump) {
  MertonProcess p;
  RngStream rng(1, 0);
  EXPECT_THROW(simulate_path(p, 1.0, 0.0, rng), ConfigError);
}

TEST(HittingIntensity, Examples) {
  RngStream rng(1, 0);
  PoissonJumpProcess poisson({2.0});
  PathState s;
  s.x = {0.0};
  GhtTracker none(Ght::hit(Region{}));
  EXPECT_EQ(hitting_intensity(poisson, none, s, 16, rng), 0.0);
  GhtTracker first(poisson.first_jump(0));
  EXPECT_DOUBLE_EQ(hitting_intensity(poisson, first, s, 16, rng), 2.0);

  GaussHawkesProcess gh;
  PathState g;
  g.x = gh.x0();
  g.t = 1.0;
  GhtTracker r1(Ght::hit(GaussHawkesProcess::orthant(1)));
  EXPECT_NEAR(hitting_intensity(gh, r1, g, 16, rng), std::pow(1 - normal_cdf(0.5), 3), 1e-14);
}

TEST(HittingIntensity, GaussHawkesMixtureMatchesSampling) {
  GaussHawkesProcess gh;
  PathState s;
  s.x = {0.6, 0.7, 0.8};
  s.t = 1.5;
  s.jump_times = {0.5, 1.2};
  s.jump_marks = {{-0.7, 0.6, 0.9}, {0.6, 0.7, 0.8}};
  const Region r = GaussHawkesProcess::orthant(2);
  const double closed = gh.jump_region_mass(s, r);
  RngStream rng(5, 0);
  const int n = 200000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += r.contains(gh.sample_mark(s, rng)) ? 1 : 0;
  const double f = static_cast<double>(hits) / n;
  EXPECT_NEAR(f, closed, 4 * std::sqrt(closed * (1 - closed) / n));
}

TEST(EulerHit, MertonQuadratureMatchesStepFrequency) {
  MertonProcess p;
  PathState s;
  s.x = {1.15};
  const Region r = Region::at_least(1.25);
  RngStream rng(9, 0);
  const double prob = euler_hit_probability(p, s, r, 0.01, 256, rng);
  const int n = 400000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    PathState t = s;
    euler_step(p, t, 0.01, rng);
    hits += r.contains(t.x) ? 1 : 0;
  }
  const double f = static_cast<double>(hits) / n;
  EXPECT_GT(prob, 0.0);
  EXPECT_NEAR(f, prob, 4 * std::sqrt(prob * (1 - prob) / n));
}

TEST(Ght, WholeSpaceHitsAtZero) {
  const auto path = hand_path({0, 1, 2});
  EXPECT_EQ(evaluate_ght(path, Ght::hit(Region::everything())), 0.0);
}

TEST(Ght, MonotonePathCrossing) {
  ConstProcess p(1, 0, 0);
  RngStream rng(1, 0);
  const auto path = simulate_path(p, 1.0, 0.01, rng);
  // 0.01 * i >= 0.5 first holds at i = 50 (up to rounding of the running sum)
  const double t = evaluate_ght(path, Ght::hit(Region::at_least(0.5 - 1e-9)));
  EXPECT_NEAR(t, 0.5, 1e-12);
  EXPECT_EQ(evaluate_ght(path, Ght::hit(Region::at_least(5.0))), kNotHit);
}

TEST(Ght, MaxOfTwoIsLaterVisit) {
  const auto path = hand_path({0, 1, 0, 0, 2, 0});
  EXPECT_EQ(evaluate_ght(path, Ght::max_of({Ght::hit(vertex(1)), Ght::hit(vertex(2))})), 4.0);
  EXPECT_EQ(evaluate_ght(path, Ght::min_of({Ght::hit(vertex(1)), Ght::hit(vertex(2))})), 1.0);
}

TEST(Ght, ClassificationConformance) {
  RngStream rng(21, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> xs{0.0};
    for (int i = 1; i < 10; ++i) xs.push_back(static_cast<double>(rng() % 4));
    const auto path = hand_path(xs);
    auto first = [&](int v, double after) {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i >= after && xs[i] == v) return static_cast<double>(i);
      }
      return kNotHit;
    };
    const double ta = first(1, 0), tb = first(2, 0);
    const Ght a = Ght::hit(vertex(1)), b = Ght::hit(vertex(2));
    EXPECT_EQ(evaluate_ght(path, a), ta);
    EXPECT_EQ(evaluate_ght(path, Ght::min_of({a, b})), std::min(ta, tb));
    EXPECT_EQ(evaluate_ght(path, Ght::max_of({a, b})), (ta == kNotHit || tb == kNotHit) ? kNotHit : std::max(ta, tb));
    const double seq_after = (tb < ta) ? ta : kNotHit;
    const double seq_before = (ta != kNotHit && ta < tb) ? ta : kNotHit;
    const Ght ga = Ght::first_if_after(vertex(1), b), gb = Ght::first_if_before(vertex(1), b);
    EXPECT_EQ(evaluate_ght(path, ga), seq_after);
    EXPECT_EQ(evaluate_ght(path, gb), seq_before);
    EXPECT_EQ(evaluate_ght(path, Ght::min_of({ga, gb})), ta);
    const double after = tb == kNotHit ? kNotHit : first(1, tb);
    EXPECT_EQ(evaluate_ght(path, Ght::after(vertex(1), b)), after);
  }
}

TEST(Ght, TieCountsAsBefore) {
  // A and A' overlap: both realize at the same observation
  const auto path = hand_path({0, 3});
  Box ab;
  ab.axes.push_back({2.5, 3.5});
  const Ght other = Ght::hit(Region::box(ab));
  EXPECT_EQ(evaluate_ght(path, Ght::first_if_before(vertex(3), other)), 1.0);
  EXPECT_EQ(evaluate_ght(path, Ght::first_if_after(vertex(3), other)), kNotHit);
}

TEST(Ght, RegionProcess) {
  GhtTracker tr(Ght::max_of({Ght::hit(vertex(1)), Ght::hit(vertex(2))}));
  const double x0[] = {0}, x1[] = {1};
  tr.observe(0, x0);
  EXPECT_TRUE(tr.region().empty());  // two disjoint pending regions
  tr.observe(1, x1);
  const double two[] = {2};
  EXPECT_TRUE(tr.region().contains(two));
  EXPECT_FALSE(tr.region().contains(x1));

  GhtTracker ex(DriftExitProcess().exit_time());
  const double low[] = {1.0}, high[] = {3.5};
  ex.observe(0, low);
  EXPECT_TRUE(ex.region().empty());
  ex.observe(1, high);
  EXPECT_TRUE(ex.region().contains(low));
  ex.observe(2, low);
  EXPECT_EQ(ex.time(), 2.0);
  EXPECT_TRUE(ex.region().empty());
}

TEST(Examples, CtmcSingleVertexCoversAtZero) {
  CtmcParams cp;
  cp.vertices = 1;
  RngStream rng(1, 0);
  const auto p = CtmcProcess::random(cp, rng);
  const auto path = simulate_path(p, 5.0, 0.0, rng);
  EXPECT_EQ(evaluate_ght(path, p.cover_time()), 0.0);
}

TEST(Examples, CtmcRowsAreSoftmax) {
  CtmcParams cp;
  cp.temperature = 0.1;
  RngStream rng(4, 0);
  const auto p = CtmcProcess::random(cp, rng);
  for (const auto& row : p.transition()) {
    double s = 0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Examples, MertonMartingale) {
  MertonProcess p;
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    RngStream rng(31, static_cast<std::uint64_t>(i));
    const auto path = simulate_path(p, 1.0, 0.01, rng);
    const double x = path.states.back()[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
  EXPECT_NEAR(mean, std::exp(p.params().r), 4 * se);
}

TEST(Examples, Factory) {
  RngStream rng(1, 0);
  EXPECT_EQ(make_example_process("merton", {}, rng)->name(), "merton");
  EXPECT_EQ(make_example_process("ctmc_cover", {{"vertices", 3}}, rng)->name(), "ctmc_cover");
  EXPECT_EQ(make_example_process("poisson", {{"rate0", 1}, {"rate1", 2}}, rng)->dim(), 2);
  EXPECT_THROW(make_example_process("merton", {{"bogus", 1}}, rng), ConfigError);
  EXPECT_THROW(make_example_process("nope", {}, rng), ConfigError);
  EXPECT_THROW(make_example_process("merton", {{"x0", -1}}, rng), ConfigError);
}

TEST(EulerHit, DriftExitClosedFormMatchesStepFrequency) {
  DriftExitProcess p;
  PathState s;
  s.x = {3.2};
  s.t = 1.0;
  s.jump_times = {0.5};
  s.jump_marks = {{0.3}};
  const Region r = Region::below(3.0);
  RngStream rng(19, 0);
  const auto parts = euler_hit_parts(p, s, r, 0.01, 256, rng);
  const int n = 400000;
  int hits = 0, jump_hits = 0;
  for (int i = 0; i < n; ++i) {
    PathState t = s;
    const bool jumped = euler_step(p, t, 0.01, rng).jumped;
    const bool in = r.contains(t.x);
    hits += in ? 1 : 0;
    jump_hits += (in && jumped) ? 1 : 0;
  }
  const double f = static_cast<double>(hits) / n, fj = static_cast<double>(jump_hits) / n;
  const double pt = parts.total();
  EXPECT_NEAR(f, pt, 4 * std::sqrt(pt * (1 - pt) / n));
  EXPECT_NEAR(fj, parts.jump, 4 * std::sqrt(parts.jump * (1 - parts.jump) / n));
}
