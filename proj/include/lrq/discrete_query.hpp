#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lrq/discrete_model.hpp"
#include "lrq/rng.hpp"
#include "lrq/stats.hpp"

namespace lrq {

/// Disjoint union of blocks. Blocks may have different lengths; a block of
/// length K constrains only the first K steps.
struct Query {
  int vocab = 0;
  std::vector<QueryBlock> blocks;

  std::size_t max_length() const;
  bool contains(std::span<const Symbol> path) const;
};

enum class QueryKind {
  first_symbol,  // X_1 = x
  marginal,      // X_K = x
  hit_at,        // first entry into A at step K
  hit_before,    // A before B, truncated to K terms
  count,         // exactly n symbols from A among K steps
};

struct QueryParams {
  Symbol x = 0;
  std::vector<Symbol> a;
  std::vector<Symbol> b;
  int k = 1;
  int n = 0;
};

Query build_query(QueryKind kind, int vocab, const QueryParams& params);

/// Throws ConfigError when sets are empty, out of range, or blocks overlap.
void validate_query(const Query& query);

double exact_enumerate(const CategoricalModel& model, const Query& query,
                       std::span<const Symbol> history = {}, double budget = 1e7);

struct ProposalStep {
  std::vector<double> probs;  // aligned with allowed.members()
  double mass = 0.0;          // sum of p over the allowed set
};

ProposalStep proposal_next_dist(const CategoricalModel& model, const SymbolSet& allowed,
                                std::span<const Symbol> history);

/// One Monte Carlo draw per index; draws are pure functions of the index.
using Sampler = std::function<double(std::uint64_t)>;

Sampler importance_sampler(const CategoricalModel& model, const Query& query, RngStream rng,
                           std::vector<Symbol> history = {});
Sampler naive_sampler(const CategoricalModel& model, const Query& query, RngStream rng,
                      std::vector<Symbol> history = {});

EstimateSummary importance_estimate(const CategoricalModel& model, const Query& query, std::size_t n,
                                    RngStream rng, std::span<const Symbol> history = {}, int workers = 0);
EstimateSummary naive_estimate(const CategoricalModel& model, const Query& query, std::size_t n,
                               RngStream rng, std::span<const Symbol> history = {}, int workers = 0);

struct Beam {
  std::vector<Symbol> path;
  double log_p = 0.0;
  double log_q = 0.0;
};

struct BeamSet {
  std::vector<Beam> beams;
  double coverage = 0.0;      // proposal mass of the beams
  double dead_mass = 0.0;     // proposal mass of prefixes with zero model mass
  bool cap_hit = false;

  double lower_bound() const;
  /// Certified bound on truth - lower_bound().
  double gap_bound() const { return std::max(0.0, 1.0 - coverage - dead_mass); }
};

/// Keeps, at step k, the fewest proposal-ranked prefixes whose mass reaches
/// schedule[k-1] (default alpha^(k/K)).
BeamSet coverage_beam_search(const CategoricalModel& model, const QueryBlock& block, double alpha,
                             std::vector<double> schedule = {}, std::size_t cap = 1u << 20,
                             std::span<const Symbol> history = {});

/// Number of leading weights (sorted descending) kept by the two-cluster split.
std::size_t tail_split_point(std::span<const double> sorted_weights);

BeamSet tail_splitting_beam_search(const CategoricalModel& model, const QueryBlock& block,
                                   std::size_t cap, std::span<const Symbol> history = {});

/// Prefix tree explored by tail-splitting search, reweighted so that
/// sampling from it draws from the proposal conditioned on missing the beams.
class PrunedTree {
 public:
  PrunedTree(const CategoricalModel& model, const QueryBlock& block, std::size_t cap,
             std::span<const Symbol> history = {});

  const BeamSet& beams() const { return beams_; }
  /// Proposal mass outside the beams (and outside dead prefixes).
  double remaining() const { return nodes_.front().remaining; }

  struct Draw {
    std::vector<Symbol> path;
    double weight = 0.0;  // p(x) / q_B(x)
  };
  Draw sample(RngStream& rng) const;

  /// Conditional edge weights q_B(. | prefix) for an explored prefix, aligned
  /// with the block's allowed set at that depth; empty if unexplored.
  std::vector<double> edge_weights(std::span<const Symbol> prefix) const;

 private:
  struct Node {
    int depth = 0;
    bool expanded = false;
    double mass = 0.0;                // s_k at this prefix
    std::vector<double> q;            // proposal over allowed members
    std::vector<int> child;           // node index or -1
    double remaining = 1.0;
  };

  const CategoricalModel* model_;
  QueryBlock block_;
  std::vector<Symbol> history_;
  std::vector<Node> nodes_;
  BeamSet beams_;
};

EstimateSummary hybrid_estimate(const CategoricalModel& model, const Query& query, std::size_t n,
                                std::size_t cap, RngStream rng, std::span<const Symbol> history = {},
                                int workers = 0);

struct HybridDiagnostic {
  bool reduces = true;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Whether adding `candidate` to `beams` lowers the remainder IS variance.
HybridDiagnostic hybrid_variance_diagnostic(const CategoricalModel& model, const QueryBlock& block,
                                            const std::vector<std::vector<Symbol>>& beams,
                                            const std::vector<Symbol>& candidate,
                                            std::span<const Symbol> history = {}, double budget = 1e7);

struct GroundTruthOptions {
  double delta = 1e-7;
  std::size_t n_low = 10000;
  std::size_t n_high = 100000;
  std::size_t step = 1000;
  int workers = 0;
};

/// Draws until the variance of the mean falls below delta or n_high is hit.
/// extra["tolerance_met"] is 1 or 0.
EstimateSummary surrogate_ground_truth(const Sampler& sampler, const GroundTruthOptions& options = {});

}  // namespace lrq
