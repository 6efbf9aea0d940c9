// Test-side reference computations, written independently of the library's
// query machinery: brute-force path enumeration and first-step analysis.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "lrq/discrete_model.hpp"

namespace oracle {

using Path = std::vector<int>;
using Predicate = std::function<bool(const Path&)>;

/// Sum of p(path) over all paths in X^K satisfying pred.
inline double brute_force(const lrq::CategoricalModel& model, int K, const Predicate& pred,
                          const Path& history = {}) {
  const int V = model.vocab_size();
  double total = 0.0;
  Path path = history;
  std::function<void(int, double)> rec = [&](int depth, double p) {
    if (p == 0.0) return;
    if (depth == K) {
      if (pred(Path(path.begin() + static_cast<long>(history.size()), path.end()))) total += p;
      return;
    }
    const auto dist = model.next_dist(path);
    for (int v = 0; v < V; ++v) {
      path.push_back(v);
      rec(depth + 1, p * dist[v]);
      path.pop_back();
    }
  };
  rec(0, 1.0);
  return total;
}

inline bool in(const std::vector<int>& set, int v) {
  for (int s : set)
    if (s == v) return true;
  return false;
}

/// First index (0-based) with path[i] in A, or -1.
inline int first_hit(const Path& path, const std::vector<int>& a) {
  for (std::size_t i = 0; i < path.size(); ++i)
    if (in(a, path[i])) return static_cast<int>(i);
  return -1;
}

/// P(hit a before b | X_0 = x0) for a first-order chain by first-step analysis.
inline double absorb_before(const lrq::MarkovModel& m, int a, int b, int x0) {
  const int V = m.vocab_size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(V, V);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(V);
  for (int i = 0; i < V; ++i) {
    rhs(i) = m.prob(static_cast<std::size_t>(i), a);
    for (int j = 0; j < V; ++j)
      if (j != a && j != b) A(i, j) -= m.prob(static_cast<std::size_t>(i), j);
  }
  Eigen::VectorXd h = A.fullPivLu().solve(rhs);
  return h(x0);
}

/// Uniform first-order chain over V symbols.
inline lrq::MarkovModel uniform_chain(int V) {
  return lrq::MarkovModel(1, V, std::vector<double>(static_cast<std::size_t>(V * V), 1.0 / V));
}

inline lrq::MarkovModel identity_chain(int V) {
  std::vector<double> t(static_cast<std::size_t>(V * V), 0.0);
  for (int i = 0; i < V; ++i) t[static_cast<std::size_t>(i * V + i)] = 1.0;
  return lrq::MarkovModel(1, V, t);
}

}  // namespace oracle
