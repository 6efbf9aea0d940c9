#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "lrq/rng.hpp"

namespace lrq {

using Symbol = int;

/// Subset of the vocabulary {0, ..., V-1}.
class SymbolSet {
 public:
  SymbolSet() = default;
  SymbolSet(int vocab, std::vector<Symbol> members);

  static SymbolSet full(int vocab);
  static SymbolSet single(int vocab, Symbol s) { return SymbolSet(vocab, {s}); }

  bool contains(Symbol s) const { return s >= 0 && s < vocab_ && mask_[s] != 0; }
  const std::vector<Symbol>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  int vocab() const { return vocab_; }

  SymbolSet complement() const;
  SymbolSet unite(const SymbolSet& other) const;
  bool intersects(const SymbolSet& other) const;

  friend bool operator==(const SymbolSet& a, const SymbolSet& b) {
    return a.vocab_ == b.vocab_ && a.members_ == b.members_;
  }

 private:
  int vocab_ = 0;
  std::vector<Symbol> members_;
  std::vector<char> mask_;
};

/// Per-step allowed sets V_1 x ... x V_K.
using QueryBlock = std::vector<SymbolSet>;

class CategoricalModel {
 public:
  virtual ~CategoricalModel() = default;
  virtual int vocab_size() const = 0;
  /// p(. | history); history symbols must lie in the vocabulary.
  virtual std::vector<double> next_dist(std::span<const Symbol> history) const = 0;
};

/// Homogeneous order-m chain. Contexts are the trailing m symbols, where
/// positions before the start of the sequence hold the pad symbol V.
class MarkovModel final : public CategoricalModel {
 public:
  /// `table` has either (V+1)^m or V^m rows of length V. With V^m rows,
  /// contexts containing the pad symbol get uniform rows.
  MarkovModel(int order, int vocab, std::vector<double> table);

  /// Rows drawn as softmax(z / temperature), z ~ N(0, 1).
  static MarkovModel random(int order, int vocab, RngStream& rng, double temperature = 1.0);

  int vocab_size() const override { return vocab_; }
  std::vector<double> next_dist(std::span<const Symbol> history) const override;

  int order() const { return order_; }
  Symbol pad() const { return vocab_; }
  std::size_t num_contexts() const { return contexts_; }
  std::size_t context_of(std::span<const Symbol> history) const;
  std::size_t shift(std::size_t context, Symbol next) const;
  std::span<const double> row(std::size_t context) const;
  double prob(std::size_t context, Symbol next) const { return table_[context * vocab_ + next]; }
  const std::vector<double>& table() const { return table_; }

 private:
  int order_;
  int vocab_;
  std::size_t contexts_;
  std::size_t radix_power_;  // (V+1)^(m-1)
  std::vector<double> table_;
};

/// One step of the restricted product: out[s][c'] = sum over c, v in V_k with
/// shift(c, v) = c' of left[s][c] * pi[c][v]. Rows and columns index contexts.
Eigen::MatrixXd restricted_tensor_product(const Eigen::MatrixXd& left, const MarkovModel& model,
                                          const SymbolSet& allowed);

/// Identity over contexts, the starting factor for restricted products.
Eigen::MatrixXd context_identity(const MarkovModel& model);

/// P(X_{1:K} in V_1 x ... x V_K | history).
double markov_query_exact(const MarkovModel& model, const QueryBlock& block,
                          std::span<const Symbol> history);

/// Stationary distribution of a first-order chain over the real symbols.
std::vector<double> steady_state(const MarkovModel& model);

/// Closed-form P(first hit of a at step k | X_0 = x0) for a first-order chain.
double markov_hit_analytic(const MarkovModel& model, Symbol a, Symbol x0, int k);

struct BeforePair {
  double a_first = 0.0;
  double b_first = 0.0;
};

/// Closed-form P(hit(a) < hit(b) | X_0 = x0) and its complement.
BeforePair markov_a_before_b_analytic(const MarkovModel& model, Symbol a, Symbol b, Symbol x0);

}  // namespace lrq
