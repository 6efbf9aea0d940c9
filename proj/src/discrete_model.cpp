#include "lrq/discrete_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrq/error.hpp"

namespace lrq {

SymbolSet::SymbolSet(int vocab, std::vector<Symbol> members)
    : vocab_(vocab), mask_(static_cast<std::size_t>(std::max(vocab, 0)), 0) {
  if (vocab < 1) throw ConfigError("vocabulary must be positive");
  for (Symbol s : members) {
    if (s < 0 || s >= vocab) throw ConfigError("symbol " + std::to_string(s) + " outside vocabulary");
    mask_[s] = 1;
  }
  for (Symbol s = 0; s < vocab; ++s)
    if (mask_[s]) members_.push_back(s);
}

SymbolSet SymbolSet::full(int vocab) {
  std::vector<Symbol> all(static_cast<std::size_t>(vocab));
  for (int i = 0; i < vocab; ++i) all[i] = i;
  return SymbolSet(vocab, std::move(all));
}

SymbolSet SymbolSet::complement() const {
  std::vector<Symbol> rest;
  for (Symbol s = 0; s < vocab_; ++s)
    if (!mask_[s]) rest.push_back(s);
  return SymbolSet(vocab_, std::move(rest));
}

SymbolSet SymbolSet::unite(const SymbolSet& other) const {
  std::vector<Symbol> all = members_;
  all.insert(all.end(), other.members_.begin(), other.members_.end());
  return SymbolSet(vocab_, std::move(all));
}

bool SymbolSet::intersects(const SymbolSet& other) const {
  return std::any_of(members_.begin(), members_.end(), [&](Symbol s) { return other.contains(s); });
}

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

MarkovModel::MarkovModel(int order, int vocab, std::vector<double> table)
    : order_(order), vocab_(vocab) {
  if (order < 1) throw ConfigError("Markov order must be >= 1");
  if (vocab < 2) throw ConfigError("vocabulary size must be >= 2");
  contexts_ = ipow(static_cast<std::size_t>(vocab) + 1, order);
  radix_power_ = ipow(static_cast<std::size_t>(vocab) + 1, order - 1);
  const std::size_t V = static_cast<std::size_t>(vocab);
  const std::size_t short_rows = ipow(V, order);
  if (table.size() == short_rows * V && short_rows != contexts_) {
    // Expand: real-symbol contexts copy their rows, pad contexts are uniform.
    std::vector<double> full(contexts_ * V, 1.0 / static_cast<double>(V));
    for (std::size_t r = 0; r < short_rows; ++r) {
      std::size_t rem = r, ctx = 0, mul = 1;
      for (int j = 0; j < order; ++j) {
        ctx += (rem % V) * mul;
        rem /= V;
        mul *= V + 1;
      }
      std::copy_n(table.begin() + static_cast<std::ptrdiff_t>(r * V), V,
                  full.begin() + static_cast<std::ptrdiff_t>(ctx * V));
    }
    table = std::move(full);
  }
  if (table.size() != contexts_ * V)
    throw ConfigError("transition table has " + std::to_string(table.size()) + " entries, expected " +
                      std::to_string(contexts_ * V) + " or " + std::to_string(short_rows * V));
  for (std::size_t c = 0; c < contexts_; ++c) {
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double p = table[c * V + v];
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("transition probabilities must lie in [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("transition row " + std::to_string(c) + " sums to " + std::to_string(sum));
  }
  table_ = std::move(table);
}

MarkovModel MarkovModel::random(int order, int vocab, RngStream& rng, double temperature) {
  const std::size_t rows = ipow(static_cast<std::size_t>(vocab) + 1, order);
  std::vector<double> table(rows * static_cast<std::size_t>(vocab));
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = table.data() + r * vocab;
    double total = 0.0;
    for (int v = 0; v < vocab; ++v) {
      row[v] = std::exp(rng.normal() / temperature);
      total += row[v];
    }
    for (int v = 0; v < vocab; ++v) row[v] /= total;
  }
  return MarkovModel(order, vocab, std::move(table));
}

// Context index: the most recent symbol is the least significant digit (base V+1).
std::size_t MarkovModel::context_of(std::span<const Symbol> history) const {
  std::size_t ctx = 0, mul = 1;
  const std::size_t base = static_cast<std::size_t>(vocab_) + 1;
  for (int j = 0; j < order_; ++j) {
    Symbol s = pad();
    if (static_cast<std::size_t>(j) < history.size()) {
      s = history[history.size() - 1 - j];
      if (s < 0 || s > vocab_) throw ConfigError("history symbol " + std::to_string(s) + " out of vocabulary");
    }
    ctx += static_cast<std::size_t>(s) * mul;
    mul *= base;
  }
  return ctx;
}

std::size_t MarkovModel::shift(std::size_t context, Symbol next) const {
  const std::size_t base = static_cast<std::size_t>(vocab_) + 1;
  return (context % radix_power_) * base + static_cast<std::size_t>(next);
}

std::span<const double> MarkovModel::row(std::size_t context) const {
  return {table_.data() + context * vocab_, static_cast<std::size_t>(vocab_)};
}

std::vector<double> MarkovModel::next_dist(std::span<const Symbol> history) const {
  for (Symbol s : history)
    if (s < 0 || s >= vocab_) throw ConfigError("history symbol " + std::to_string(s) + " out of vocabulary");
  auto r = row(context_of(history));
  return {r.begin(), r.end()};
}

Eigen::MatrixXd context_identity(const MarkovModel& model) {
  const auto n = static_cast<Eigen::Index>(model.num_contexts());
  return Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd restricted_tensor_product(const Eigen::MatrixXd& left, const MarkovModel& model,
                                          const SymbolSet& allowed) {
  if (allowed.empty()) throw ConfigError("restricted step needs a nonempty symbol set");
  const auto n = static_cast<Eigen::Index>(model.num_contexts());
  if (left.cols() != n) throw ConfigError("left factor does not match the model's context count");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(left.rows(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Symbol v : allowed.members()) {
      const double p = model.prob(static_cast<std::size_t>(c), v);
      if (p == 0.0) continue;
      const auto next = static_cast<Eigen::Index>(model.shift(static_cast<std::size_t>(c), v));
      out.col(next) += p * left.col(c);
    }
  }
  return out;
}

double markov_query_exact(const MarkovModel& model, const QueryBlock& block,
                          std::span<const Symbol> history) {
  // Forward pass of the restricted product for the single start context.
  const std::size_t n = model.num_contexts();
  std::vector<double> mass(n, 0.0), next(n, 0.0);
  mass[model.context_of(history)] = 1.0;
  for (const SymbolSet& allowed : block) {
    if (allowed.empty()) throw ConfigError("query step has an empty symbol set");
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t c = 0; c < n; ++c) {
      if (mass[c] == 0.0) continue;
      for (Symbol v : allowed.members()) next[model.shift(c, v)] += mass[c] * model.prob(c, v);
    }
    std::swap(mass, next);
  }
  double total = 0.0;
  for (double m : mass) total += m;
  return total;
}

std::vector<double> steady_state(const MarkovModel& model) {
  if (model.order() != 1) throw ConfigError("steady state requires a first-order chain");
  const int V = model.vocab_size();
  Eigen::MatrixXd A(V, V);
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j) A(j, i) = model.prob(static_cast<std::size_t>(i), j) - (i == j ? 1.0 : 0.0);
  A.row(V - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(V);
  rhs(V - 1) = 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0 || sv(0) / smin > 1e12) throw NumericError("steady state undefined");
  Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  std::vector<double> out(pi.data(), pi.data() + V);
  for (double& p : out) {
    if (p < -1e-9) throw NumericError("steady state undefined");
    p = std::max(p, 0.0);
  }
  return out;
}

namespace {

void check_first_order(const MarkovModel& model, std::initializer_list<Symbol> syms) {
  if (model.order() != 1) throw ConfigError("closed forms require a first-order chain");
  for (Symbol s : syms)
    if (s < 0 || s > model.vocab_size()) throw ConfigError("symbol out of vocabulary");
}

}  // namespace

double markov_hit_analytic(const MarkovModel& model, Symbol a, Symbol x0, int k) {
  check_first_order(model, {a, x0});
  if (a == model.pad()) throw ConfigError("target symbol cannot be the pad symbol");
  if (k < 1) throw ConfigError("hitting step must be >= 1");
  const std::size_t start = static_cast<std::size_t>(x0);
  const double to_a = model.prob(start, a);
  if (k == 1) return to_a;
  if (to_a >= 1.0) return 0.0;
  const auto pi = steady_state(model);
  double pi_not = 0.0, flow = 0.0;
  for (int i = 0; i < model.vocab_size(); ++i) {
    if (i == a) continue;
    pi_not += pi[i];
    flow += pi[i] * model.prob(static_cast<std::size_t>(i), a);
  }
  if (pi_not <= 0.0) throw NumericError("steady state undefined");
  const double not_to_a = flow / pi_not;
  const double stay = 1.0 - not_to_a;
  return (1.0 - to_a) * not_to_a * std::pow(stay, k - 2);
}

BeforePair markov_a_before_b_analytic(const MarkovModel& model, Symbol a, Symbol b, Symbol x0) {
  check_first_order(model, {a, b, x0});
  if (a == b) throw ConfigError("a and b must differ");
  if (a == model.pad() || b == model.pad()) throw ConfigError("targets cannot be the pad symbol");
  const std::size_t start = static_cast<std::size_t>(x0);
  const double to_a = model.prob(start, a);
  const double to_b = model.prob(start, b);
  const double to_rest = std::max(0.0, 1.0 - to_a - to_b);
  if (model.vocab_size() == 2) return {to_a, to_b};
  const auto pi = steady_state(model);
  double pi_rest = 0.0, flow_a = 0.0, flow_b = 0.0;
  for (int i = 0; i < model.vocab_size(); ++i) {
    if (i == a || i == b) continue;
    pi_rest += pi[i];
    flow_a += pi[i] * model.prob(static_cast<std::size_t>(i), a);
    flow_b += pi[i] * model.prob(static_cast<std::size_t>(i), b);
  }
  if (pi_rest <= 0.0 || flow_a + flow_b <= 0.0)
    throw NumericError("neither a nor b reachable from the complement class");
  const double share_a = flow_a / (flow_a + flow_b);
  return {to_a + to_rest * share_a, to_b + to_rest * (1.0 - share_a)};
}

}  // namespace lrq
