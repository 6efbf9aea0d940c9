#include <gtest/gtest.h>

#include <cmath>

#include "lrq/discrete_model.hpp"
#include "lrq/error.hpp"
#include "oracle.hpp"

using namespace lrq;

namespace {

QueryBlock hit_block(int V, Symbol a, int K) {
  SymbolSet target = SymbolSet::single(V, a);
  QueryBlock b(static_cast<std::size_t>(K - 1), target.complement());
  b.push_back(target);
  return b;
}

// Chain where every non-target state moves to `a` with the same probability.
MarkovModel lumpable_chain(RngStream& rng, int V, Symbol a, double to_a) {
  std::vector<double> t(static_cast<std::size_t>(V * V));
  for (int i = 0; i < V; ++i) {
    double rest = 0.0;
    std::vector<double> w(V);
    for (int j = 0; j < V; ++j) {
      w[j] = j == a ? 0.0 : rng.uniform() + 0.05;
      rest += w[j];
    }
    const double target = i == a ? rng.uniform() * 0.8 + 0.1 : to_a;
    for (int j = 0; j < V; ++j) t[i * V + j] = j == a ? target : (1.0 - target) * w[j] / rest;
  }
  return MarkovModel(1, V, t);
}

}  // namespace

TEST(NextDist, UniformChain) {
  auto m = oracle::uniform_chain(3);
  std::vector<Symbol> h{0, 2, 1};
  for (double p : m.next_dist(h)) EXPECT_DOUBLE_EQ(p, 1.0 / 3);
}

TEST(NextDist, DeterministicChain) {
  auto m = oracle::identity_chain(3);
  std::vector<Symbol> h{0, 1};
  auto d = m.next_dist(h);
  EXPECT_EQ(d[0], 0.0);
  EXPECT_EQ(d[1], 1.0);
  EXPECT_EQ(d[2], 0.0);
}

TEST(NextDist, SecondOrderIndexLookup) {
  // V^m rows: row r encodes context (older, newer) with newer least significant.
  std::vector<double> t;
  for (int older = 0; older < 2; ++older)
    for (int newer = 0; newer < 2; ++newer) {
      const double p = 0.1 + 0.2 * older + 0.4 * newer;
      t.push_back(p);
      t.push_back(1 - p);
    }
  MarkovModel m(2, 2, t);
  std::vector<Symbol> h{0, 1};
  EXPECT_DOUBLE_EQ(m.next_dist(h)[0], 0.5);
  h = {1, 0};
  EXPECT_DOUBLE_EQ(m.next_dist(h)[0], 0.3);
  h = {1, 1, 1};
  EXPECT_DOUBLE_EQ(m.next_dist(h)[0], 0.7);
}

TEST(NextDist, OutOfVocabRejected) {
  auto m = oracle::uniform_chain(3);
  std::vector<Symbol> h{3};
  EXPECT_THROW(m.next_dist(h), ConfigError);
}

TEST(NextDist, RandomRowsNormalized) {
  RngStream rng(5, 5);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = MarkovModel::random(1 + rep % 2, 2 + rep % 4, rng);
    std::vector<Symbol> h;
    for (int k = 0; k < 6; ++k) {
      auto d = m.next_dist(h);
      double s = 0;
      for (double p : d) {
        EXPECT_GE(p, 0.0);
        s += p;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
      h.push_back(k % m.vocab_size());
    }
  }
}

TEST(MarkovModelTest, RejectsBadRows) {
  EXPECT_THROW(MarkovModel(1, 2, {0.5, 0.6, 0.5, 0.5}), ConfigError);
  EXPECT_THROW(MarkovModel(1, 2, {1.5, -0.5, 0.5, 0.5}), ConfigError);
  EXPECT_THROW(MarkovModel(1, 2, {1.0, 0.0}), ConfigError);
}

TEST(TensorProduct, FullSetIsMatrixProduct) {
  RngStream rng(1, 1);
  auto m = MarkovModel::random(1, 3, rng);
  const auto n = static_cast<Eigen::Index>(m.num_contexts());
  Eigen::MatrixXd P(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) P(i, j) = j < 3 ? m.prob(static_cast<std::size_t>(i), static_cast<Symbol>(j)) : 0.0;
  auto once = restricted_tensor_product(context_identity(m), m, SymbolSet::full(3));
  EXPECT_LT((once - P).cwiseAbs().maxCoeff(), 1e-15);
  auto twice = restricted_tensor_product(once, m, SymbolSet::full(3));
  EXPECT_LT((twice - P * P).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TensorProduct, UniformRestrictedToSingleSymbol) {
  auto m = oracle::uniform_chain(3);
  Eigen::MatrixXd left = Eigen::MatrixXd::Zero(4, 4);
  left(0, 0) = 0.2;
  left(0, 1) = 0.5;
  left(0, 2) = 0.3;
  left(1, 1) = 1.0;
  auto out = restricted_tensor_product(left, m, SymbolSet::single(3, 2));
  // Each row's mass over real symbols is routed to column a with factor 1/3.
  EXPECT_NEAR(out(0, 2), 1.0 / 3, 1e-15);
  EXPECT_NEAR(out(1, 2), 1.0 / 3, 1e-15);
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(2, 2), 0.0);
}

TEST(TensorProduct, ZeroRowStaysZero) {
  RngStream rng(2, 2);
  auto m = MarkovModel::random(2, 3, rng);
  Eigen::MatrixXd left = context_identity(m);
  left.row(4).setZero();
  auto out = restricted_tensor_product(left, m, SymbolSet(3, {0, 2}));
  EXPECT_EQ(out.row(4).cwiseAbs().sum(), 0.0);
}

TEST(TensorProduct, EmptySetRejected) {
  auto m = oracle::uniform_chain(3);
  EXPECT_THROW(restricted_tensor_product(context_identity(m), m, SymbolSet(3, {})), ConfigError);
}

TEST(QueryExact, UniformHitting) {
  auto m = oracle::uniform_chain(3);
  EXPECT_NEAR(markov_query_exact(m, hit_block(3, 0, 1), {}), 1.0 / 3, 1e-15);
  EXPECT_NEAR(markov_query_exact(m, hit_block(3, 0, 3), {}), 4.0 / 27, 1e-15);
}

TEST(QueryExact, FullSpaceIsOne) {
  RngStream rng(3, 3);
  auto m = MarkovModel::random(2, 4, rng);
  QueryBlock all(6, SymbolSet::full(4));
  EXPECT_NEAR(markov_query_exact(m, all, {}), 1.0, 1e-12);
}

TEST(QueryExact, DeterministicPointMass) {
  auto m = oracle::identity_chain(3);
  std::vector<Symbol> h{1};
  QueryBlock b(4, SymbolSet::single(3, 1));
  EXPECT_EQ(markov_query_exact(m, b, h), 1.0);
  b[2] = SymbolSet::single(3, 0);
  EXPECT_EQ(markov_query_exact(m, b, h), 0.0);
}

TEST(QueryExact, MatchesBruteForceOnRandomQueries) {
  RngStream rng(42, 0);
  for (int rep = 0; rep < 60; ++rep) {
    const int V = 2 + static_cast<int>(rng() % 4);
    const int m_order = 1 + static_cast<int>(rng() % 2);
    const int K = 1 + static_cast<int>(rng() % 6);
    auto m = MarkovModel::random(m_order, V, rng);
    QueryBlock block;
    for (int k = 0; k < K; ++k) {
      std::vector<Symbol> mem;
      for (int v = 0; v < V; ++v)
        if (rng.uniform() < 0.6) mem.push_back(v);
      if (mem.empty()) mem.push_back(static_cast<Symbol>(rng() % V));
      block.emplace_back(V, mem);
    }
    std::vector<Symbol> h;
    if (rep % 3 == 0) h = {static_cast<Symbol>(rng() % V)};
    auto pred = [&](const oracle::Path& p) {
      for (int k = 0; k < K; ++k)
        if (!block[k].contains(p[k])) return false;
      return true;
    };
    EXPECT_NEAR(markov_query_exact(m, block, h), oracle::brute_force(m, K, pred, h), 1e-12);
  }
}

TEST(QueryExact, HomogeneousShift) {
  RngStream rng(6, 6);
  auto m = MarkovModel::random(2, 3, rng);
  QueryBlock b{SymbolSet(3, {0, 1}), SymbolSet(3, {2}), SymbolSet(3, {1, 2})};
  std::vector<Symbol> h1{2, 0};
  std::vector<Symbol> h2{1, 1, 0, 2, 2, 0};
  EXPECT_NEAR(markov_query_exact(m, b, h1), markov_query_exact(m, b, h2), 1e-15);
}

TEST(SteadyState, SolvesStationaryEquations) {
  RngStream rng(7, 7);
  auto m = MarkovModel::random(1, 4, rng);
  auto pi = steady_state(m);
  for (int j = 0; j < 4; ++j) {
    double flow = 0;
    for (int i = 0; i < 4; ++i) flow += pi[i] * m.prob(static_cast<std::size_t>(i), j);
    EXPECT_NEAR(flow, pi[j], 1e-12);
  }
}

TEST(SteadyState, ReducibleChainRejected) {
  EXPECT_THROW(steady_state(oracle::identity_chain(3)), NumericError);
}

TEST(HitAnalytic, UniformChain) {
  auto m = oracle::uniform_chain(3);
  EXPECT_NEAR(markov_hit_analytic(m, 0, 1, 1), 1.0 / 3, 1e-15);
  EXPECT_NEAR(markov_hit_analytic(m, 0, 1, 4), 8.0 / 81, 1e-15);
}

TEST(HitAnalytic, SureImmediateHit) {
  std::vector<double> t{1, 0, 0, 1, 0, 0, 1, 0, 0};
  MarkovModel m(1, 3, t);
  EXPECT_EQ(markov_hit_analytic(m, 0, 2, 2), 0.0);
}

TEST(HitAnalytic, ExactOnLumpableChains) {
  RngStream rng(9, 9);
  for (int rep = 0; rep < 20; ++rep) {
    const int V = 3 + rep % 3;
    auto m = lumpable_chain(rng, V, 0, 0.1 + 0.6 * rng.uniform());
    const Symbol x0 = 1 + rep % (V - 1);
    for (int k = 1; k <= 7; ++k) {
      std::vector<Symbol> h{x0};
      EXPECT_NEAR(markov_hit_analytic(m, 0, x0, k), markov_query_exact(m, hit_block(V, 0, k), h), 1e-12);
    }
  }
}

TEST(BeforeAnalytic, UniformSymmetry) {
  auto m = oracle::uniform_chain(3);
  auto r = markov_a_before_b_analytic(m, 0, 1, 2);
  EXPECT_NEAR(r.a_first, 0.5, 1e-15);
  EXPECT_NEAR(r.a_first + r.b_first, 1.0, 1e-12);
}

TEST(BeforeAnalytic, ImmediateHit) {
  std::vector<double> t{0.2, 0.3, 0.5, 0.1, 0.1, 0.8, 1.0, 0.0, 0.0};
  MarkovModel m(1, 3, t);
  EXPECT_NEAR(markov_a_before_b_analytic(m, 0, 1, 2).a_first, 1.0, 1e-15);
}

TEST(BeforeAnalytic, MatchesFirstStepAnalysisWhenLumpable) {
  // Rows of non-target states share their a and b probabilities.
  std::vector<double> t{0.2, 0.3, 0.25, 0.25,   //
                        0.1, 0.6, 0.1, 0.2,     //
                        0.15, 0.35, 0.4, 0.1,   //
                        0.15, 0.35, 0.05, 0.45};
  MarkovModel m(1, 4, t);
  for (Symbol x0 = 0; x0 < 4; ++x0) {
    auto r = markov_a_before_b_analytic(m, 0, 1, x0);
    EXPECT_NEAR(r.a_first, oracle::absorb_before(m, 0, 1, x0), 1e-12);
    EXPECT_NEAR(r.a_first + r.b_first, 1.0, 1e-12);
  }
}

TEST(BeforeAnalytic, UnreachableTargets) {
  // The rest state {2} is absorbing; a and b are never reached from it.
  std::vector<double> t{0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.0, 0.0, 1.0};
  MarkovModel m(1, 3, t);
  EXPECT_THROW(markov_a_before_b_analytic(m, 0, 1, 2), NumericError);
}
