#include "lrq/discrete_query.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "lrq/error.hpp"
#include "lrq/parallel.hpp"

namespace lrq {

std::size_t Query::max_length() const {
  std::size_t k = 0;
  for (const auto& b : blocks) k = std::max(k, b.size());
  return k;
}

bool Query::contains(std::span<const Symbol> path) const {
  for (const auto& block : blocks) {
    if (path.size() < block.size()) continue;
    bool ok = true;
    for (std::size_t k = 0; k < block.size() && ok; ++k) ok = block[k].contains(path[k]);
    if (ok) return true;
  }
  return false;
}

void validate_query(const Query& query) {
  if (query.blocks.empty()) throw ConfigError("query has no blocks");
  for (const auto& block : query.blocks) {
    if (block.empty()) throw ConfigError("query block has no steps");
    for (const auto& set : block) {
      if (set.empty()) throw ConfigError("query step has an empty symbol set");
      if (set.vocab() != query.vocab) throw ConfigError("query step vocabulary mismatch");
    }
  }
  // Two blocks are disjoint iff some shared position has disjoint sets.
  for (std::size_t i = 0; i < query.blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < query.blocks.size(); ++j) {
      const auto& a = query.blocks[i];
      const auto& b = query.blocks[j];
      bool disjoint = false;
      for (std::size_t k = 0; k < std::min(a.size(), b.size()) && !disjoint; ++k)
        disjoint = !a[k].intersects(b[k]);
      if (!disjoint)
        throw ConfigError("query blocks " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    }
  }
}

namespace {

void combinations(int k, int n, int start, std::vector<int>& pick, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(pick.size()) == n) {
    out.push_back(pick);
    return;
  }
  for (int i = start; i < k; ++i) {
    pick.push_back(i);
    combinations(k, n, i + 1, pick, out);
    pick.pop_back();
  }
}

}  // namespace

Query build_query(QueryKind kind, int vocab, const QueryParams& p) {
  Query q;
  q.vocab = vocab;
  const SymbolSet all = SymbolSet::full(vocab);
  if (p.k < 1) throw ConfigError("query horizon K must be >= 1");
  switch (kind) {
    case QueryKind::first_symbol:
      q.blocks.push_back({SymbolSet::single(vocab, p.x)});
      break;
    case QueryKind::marginal: {
      QueryBlock block(static_cast<std::size_t>(p.k - 1), all);
      block.push_back(SymbolSet::single(vocab, p.x));
      q.blocks.push_back(std::move(block));
      break;
    }
    case QueryKind::hit_at: {
      const SymbolSet a(vocab, p.a);
      if (a.empty()) throw ConfigError("hit query needs a nonempty target set");
      const SymbolSet rest = a.complement();
      if (rest.empty() && p.k > 1) throw ConfigError("target set covers the vocabulary; hit can only occur at step 1");
      QueryBlock block(static_cast<std::size_t>(p.k - 1), rest);
      block.push_back(a);
      q.blocks.push_back(std::move(block));
      break;
    }
    case QueryKind::hit_before: {
      const SymbolSet a(vocab, p.a), b(vocab, p.b);
      if (a.empty() || b.empty()) throw ConfigError("A-before-B needs nonempty A and B");
      if (a.intersects(b)) throw ConfigError("A and B must be disjoint");
      const SymbolSet rest = a.unite(b).complement();
      for (int i = 1; i <= p.k; ++i) {
        if (i > 1 && rest.empty()) break;
        QueryBlock block(static_cast<std::size_t>(i - 1), rest);
        block.push_back(a);
        q.blocks.push_back(std::move(block));
      }
      break;
    }
    case QueryKind::count: {
      const SymbolSet a(vocab, p.a);
      if (a.empty()) throw ConfigError("count query needs a nonempty set");
      if (p.n < 0 || p.n > p.k) throw ConfigError("count query needs 0 <= n <= K");
      const SymbolSet rest = a.complement();
      if (rest.empty() && p.n < p.k) throw ConfigError("count query: complement of A is empty");
      std::vector<std::vector<int>> picks;
      std::vector<int> pick;
      combinations(p.k, p.n, 0, pick, picks);
      for (const auto& chosen : picks) {
        QueryBlock block(static_cast<std::size_t>(p.k), rest);
        for (int pos : chosen) block[pos] = a;
        q.blocks.push_back(std::move(block));
      }
      break;
    }
  }
  validate_query(q);
  return q;
}

namespace {

double enumeration_cost(const Query& query) {
  double total = 0.0;
  for (const auto& block : query.blocks) {
    double width = 1.0;
    for (const auto& set : block) {
      total += width;
      width *= static_cast<double>(set.size());
    }
  }
  return total;
}

double enumerate_block(const CategoricalModel& model, const QueryBlock& block, std::vector<Symbol>& path,
                       std::size_t depth) {
  if (depth == block.size()) return 1.0;
  const auto dist = model.next_dist(path);
  double total = 0.0;
  for (Symbol v : block[depth].members()) {
    const double p = dist[v];
    if (p == 0.0) continue;
    path.push_back(v);
    total += p * enumerate_block(model, block, path, depth + 1);
    path.pop_back();
  }
  return total;
}

}  // namespace

double exact_enumerate(const CategoricalModel& model, const Query& query, std::span<const Symbol> history,
                       double budget) {
  validate_query(query);
  const double cost = enumeration_cost(query);
  if (cost > budget)
    throw ConfigError("enumeration intractable: cost " + std::to_string(cost) + " exceeds budget " +
                      std::to_string(budget));
  double total = 0.0;
  for (const auto& block : query.blocks) {
    std::vector<Symbol> path(history.begin(), history.end());
    total += enumerate_block(model, block, path, 0);
  }
  return total;
}

ProposalStep proposal_next_dist(const CategoricalModel& model, const SymbolSet& allowed,
                                std::span<const Symbol> history) {
  if (allowed.empty()) throw ConfigError("proposal needs a nonempty allowed set");
  auto dist = model.next_dist(history);
  ProposalStep step;
  if (allowed.size() == dist.size()) {
    step.probs = std::move(dist);
    step.mass = 1.0;
    return step;
  }
  step.probs.reserve(allowed.size());
  for (Symbol v : allowed.members()) {
    step.probs.push_back(dist[v]);
    step.mass += dist[v];
  }
  if (step.mass > 0.0)
    for (double& q : step.probs) q /= step.mass;
  return step;
}

namespace {

double allowed_mass(const std::vector<double>& dist, const SymbolSet& allowed) {
  if (allowed.size() == dist.size()) return 1.0;
  double s = 0.0;
  for (Symbol v : allowed.members()) s += dist[v];
  return s;
}

// Blocks share a sampling path when every block agrees with the longest one
// on all positions before its own final step.
bool shares_prefix(const Query& query, std::size_t& longest) {
  longest = 0;
  for (std::size_t b = 1; b < query.blocks.size(); ++b)
    if (query.blocks[b].size() > query.blocks[longest].size()) longest = b;
  const auto& spine = query.blocks[longest];
  for (const auto& block : query.blocks)
    for (std::size_t k = 0; k + 1 < block.size(); ++k)
      if (!(block[k] == spine[k])) return false;
  return true;
}

// log prod s_k along one proposal path; -inf when the path dies.
double block_log_weight(const CategoricalModel& model, const QueryBlock& block, std::vector<Symbol>& path,
                        RngStream& rng) {
  double log_w = 0.0;
  for (std::size_t k = 0; k < block.size(); ++k) {
    const auto step = proposal_next_dist(model, block[k], path);
    if (step.mass <= 0.0) return -kInf;
    log_w += std::log(step.mass);
    if (k + 1 == block.size()) break;
    path.push_back(block[k].members()[draw_index(step.probs, 1.0, rng)]);
  }
  return log_w;
}

}  // namespace

Sampler importance_sampler(const CategoricalModel& model, const Query& query, RngStream rng,
                           std::vector<Symbol> history) {
  validate_query(query);
  std::size_t longest = 0;
  if (shares_prefix(query, longest)) {
    // One path along the shared prefix; each block adds its own final mass.
    std::vector<std::vector<std::size_t>> ending(query.blocks[longest].size());
    for (std::size_t b = 0; b < query.blocks.size(); ++b) ending[query.blocks[b].size() - 1].push_back(b);
    return [&model, query, longest, ending, rng, history](std::uint64_t i) {
      RngStream r = rng.substream(i);
      std::vector<Symbol> path = history;
      const auto& spine = query.blocks[longest];
      double log_prefix = 0.0, value = 0.0;
      for (std::size_t k = 0; k < spine.size(); ++k) {
        const auto dist = model.next_dist(path);
        for (std::size_t b : ending[k]) {
          const double s = allowed_mass(dist, query.blocks[b][k]);
          if (s > 0.0) value += std::exp(log_prefix + std::log(s));
        }
        if (k + 1 == spine.size()) break;
        const double s = allowed_mass(dist, spine[k]);
        std::vector<double> w;
        w.reserve(spine[k].size());
        for (Symbol v : spine[k].members()) w.push_back(dist[v]);
        if (s <= 0.0) break;
        log_prefix += std::log(s);
        path.push_back(spine[k].members()[draw_index(w, s, r)]);
      }
      return value;
    };
  }
  return [&model, query, rng, history](std::uint64_t i) {
    double value = 0.0;
    for (std::size_t b = 0; b < query.blocks.size(); ++b) {
      RngStream r = rng.substream(i * query.blocks.size() + b);
      std::vector<Symbol> path = history;
      const double lw = block_log_weight(model, query.blocks[b], path, r);
      if (std::isfinite(lw)) value += std::exp(lw);
    }
    return value;
  };
}

Sampler naive_sampler(const CategoricalModel& model, const Query& query, RngStream rng,
                      std::vector<Symbol> history) {
  validate_query(query);
  return [&model, query, rng, history](std::uint64_t i) {
    RngStream r = rng.substream(i);
    std::vector<Symbol> path = history;
    const std::size_t K = query.max_length();
    for (std::size_t k = 0; k < K; ++k) {
      const auto dist = model.next_dist(path);
      path.push_back(static_cast<Symbol>(draw_index(dist, 1.0, r)));
    }
    return query.contains(std::span<const Symbol>(path).subspan(history.size())) ? 1.0 : 0.0;
  };
}

EstimateSummary importance_estimate(const CategoricalModel& model, const Query& query, std::size_t n,
                                    RngStream rng, std::span<const Symbol> history, int workers) {
  if (n < 1) throw ConfigError("need at least one sample");
  const auto sampler = importance_sampler(model, query, rng, {history.begin(), history.end()});
  return sample_mean(n, workers, sampler, "IS");
}

EstimateSummary naive_estimate(const CategoricalModel& model, const Query& query, std::size_t n,
                               RngStream rng, std::span<const Symbol> history, int workers) {
  if (n < 1) throw ConfigError("need at least one sample");
  const auto sampler = naive_sampler(model, query, rng, {history.begin(), history.end()});
  const auto values = parallel_map<double>(n, workers, sampler);
  const double hits = std::accumulate(values.begin(), values.end(), 0.0);
  const double p = hits / static_cast<double>(n);
  const double var = n > 1 ? p * (1.0 - p) * static_cast<double>(n) / static_cast<double>(n - 1) : 0.0;
  return make_summary(n, p, var, "naive");
}

double BeamSet::lower_bound() const {
  double total = 0.0;
  for (const auto& b : beams) total += std::exp(b.log_p);
  return total;
}

namespace {

struct Candidate {
  std::size_t parent;
  Symbol symbol;
  double log_p;
  double log_q;
};

bool path_less(const std::vector<Symbol>& a, Symbol sa, const std::vector<Symbol>& b, Symbol sb) {
  const int c = std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end())   ? -1
                : std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end()) ? 1
                                                                                       : 0;
  return c != 0 ? c < 0 : sa < sb;
}

}  // namespace

BeamSet coverage_beam_search(const CategoricalModel& model, const QueryBlock& block, double alpha,
                             std::vector<double> schedule, std::size_t cap, std::span<const Symbol> history) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("coverage target must lie in (0, 1)");
  if (block.empty()) throw ConfigError("empty query block");
  const std::size_t K = block.size();
  if (schedule.empty()) {
    for (std::size_t k = 1; k <= K; ++k) schedule.push_back(std::pow(alpha, static_cast<double>(k) / K));
  }
  if (schedule.size() != K) throw ConfigError("coverage schedule length must equal the block length");
  if (cap < 1) throw ConfigError("beam cap must be >= 1");

  BeamSet out;
  std::vector<Beam> beams{Beam{}};
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < beams.size(); ++i) {
      std::vector<Symbol> ctx(history.begin(), history.end());
      ctx.insert(ctx.end(), beams[i].path.begin(), beams[i].path.end());
      const auto step = proposal_next_dist(model, block[k], ctx);
      if (step.mass <= 0.0) {
        out.dead_mass += std::exp(beams[i].log_q);
        continue;
      }
      for (std::size_t j = 0; j < step.probs.size(); ++j) {
        if (step.probs[j] <= 0.0) continue;
        cands.push_back({i, block[k].members()[j], beams[i].log_p + std::log(step.mass * step.probs[j]),
                         beams[i].log_q + std::log(step.probs[j])});
      }
    }
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.log_q != b.log_q) return a.log_q > b.log_q;
      return path_less(beams[a.parent].path, a.symbol, beams[b.parent].path, b.symbol);
    });
    std::vector<Beam> kept;
    double cum = 0.0;
    for (const auto& c : cands) {
      if (cum >= schedule[k]) break;
      if (kept.size() == cap) {
        out.cap_hit = true;
        break;
      }
      Beam nb{beams[c.parent].path, c.log_p, c.log_q};
      nb.path.push_back(c.symbol);
      kept.push_back(std::move(nb));
      cum += std::exp(c.log_q);
    }
    beams = std::move(kept);
  }
  out.beams = std::move(beams);
  for (const auto& b : out.beams) out.coverage += std::exp(b.log_q);
  return out;
}

std::size_t tail_split_point(std::span<const double> w) {
  const std::size_t n = w.size();
  if (n <= 1) return n;
  // Population variance of the head [0, b) and tail [b, n) via running sums.
  std::vector<double> s(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s[i + 1] = s[i] + w[i];
    s2[i + 1] = s2[i] + w[i] * w[i];
  }
  auto var = [&](std::size_t lo, std::size_t hi) {
    const std::size_t m = hi - lo;
    if (m <= 1) return 0.0;
    const double mean = (s[hi] - s[lo]) / static_cast<double>(m);
    return std::max(0.0, (s2[hi] - s2[lo]) / static_cast<double>(m) - mean * mean);
  };
  double scale = 0.0;
  for (double x : w) scale = std::max(scale, x * x);
  const double tol = 1e-12 * scale;
  std::size_t best = n;
  double best_cost = var(0, n);
  for (std::size_t b = n - 1; b >= 1; --b) {
    const double cost = var(0, b) + var(b, n);
    if (cost < best_cost - tol) {
      best_cost = cost;
      best = b;
    }
  }
  return best;
}

BeamSet tail_splitting_beam_search(const CategoricalModel& model, const QueryBlock& block, std::size_t cap,
                                   std::span<const Symbol> history) {
  return PrunedTree(model, block, cap, history).beams();
}

PrunedTree::PrunedTree(const CategoricalModel& model, const QueryBlock& block, std::size_t cap,
                       std::span<const Symbol> history)
    : model_(&model), block_(block), history_(history.begin(), history.end()) {
  if (block_.empty()) throw ConfigError("empty query block");
  if (cap < 1) throw ConfigError("beam cap must be >= 1");
  const std::size_t K = block_.size();
  struct Frontier {
    int node;
    std::vector<Symbol> path;
    double log_p;
    double log_q;
  };
  nodes_.push_back(Node{});
  std::vector<Frontier> frontier{{0, {}, 0.0, 0.0}};
  std::vector<int> leaves;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      Node& node = nodes_[frontier[i].node];
      std::vector<Symbol> ctx = history_;
      ctx.insert(ctx.end(), frontier[i].path.begin(), frontier[i].path.end());
      const auto step = proposal_next_dist(model, block_[k], ctx);
      node.depth = static_cast<int>(k);
      node.expanded = true;
      node.mass = step.mass;
      node.q = step.probs;
      node.child.assign(step.probs.size(), -1);
      if (step.mass <= 0.0) {
        beams_.dead_mass += std::exp(frontier[i].log_q);
        continue;
      }
      for (std::size_t j = 0; j < step.probs.size(); ++j) {
        if (step.probs[j] <= 0.0) continue;
        cands.push_back({i, static_cast<Symbol>(j), frontier[i].log_p + std::log(step.mass * step.probs[j]),
                         frontier[i].log_q + std::log(step.probs[j])});
      }
    }
    // Candidate symbol fields hold member indices here; compare by symbol.
    auto sym = [&](const Candidate& c) { return block_[k].members()[c.symbol]; };
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.log_p != b.log_p) return a.log_p > b.log_p;
      return path_less(frontier[a.parent].path, sym(a), frontier[b.parent].path, sym(b));
    });
    std::vector<double> w(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) w[i] = std::exp(cands[i].log_p);
    std::size_t keep = tail_split_point(w);
    if (keep > cap) {
      keep = cap;
      beams_.cap_hit = true;
    }
    std::vector<Frontier> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      const int idx = static_cast<int>(nodes_.size());
      nodes_[frontier[c.parent].node].child[c.symbol] = idx;
      Node child;
      child.depth = static_cast<int>(k + 1);
      nodes_.push_back(child);
      Frontier f{idx, frontier[c.parent].path, c.log_p, c.log_q};
      f.path.push_back(sym(c));
      next.push_back(std::move(f));
    }
    frontier = std::move(next);
  }
  for (const auto& f : frontier) {
    beams_.beams.push_back({f.path, f.log_p, f.log_q});
    beams_.coverage += std::exp(f.log_q);
    nodes_[f.node].remaining = 0.0;
  }
  // Children always have larger indices, so a reverse sweep is bottom-up.
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (static_cast<std::size_t>(node.depth) == K) continue;  // leaf: set above (0) or default (1)
    if (!node.expanded) continue;
    if (node.mass <= 0.0) {
      node.remaining = 0.0;
      continue;
    }
    double r = 0.0;
    for (std::size_t j = 0; j < node.q.size(); ++j) {
      if (node.q[j] <= 0.0) continue;
      r += node.q[j] * (node.child[j] < 0 ? 1.0 : nodes_[node.child[j]].remaining);
    }
    node.remaining = r;
  }
}

std::vector<double> PrunedTree::edge_weights(std::span<const Symbol> prefix) const {
  int idx = 0;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    const Node& node = nodes_[idx];
    if (!node.expanded) return {};
    const auto& members = block_[k].members();
    const auto it = std::find(members.begin(), members.end(), prefix[k]);
    if (it == members.end()) return {};
    idx = node.child[static_cast<std::size_t>(it - members.begin())];
    if (idx < 0) return {};
  }
  const Node& node = nodes_[idx];
  if (!node.expanded || node.remaining <= 0.0) return {};
  std::vector<double> w(node.q.size());
  for (std::size_t j = 0; j < w.size(); ++j)
    w[j] = node.q[j] * (node.child[j] < 0 ? 1.0 : nodes_[node.child[j]].remaining) / node.remaining;
  return w;
}

PrunedTree::Draw PrunedTree::sample(RngStream& rng) const {
  Draw d;
  const double root = remaining();
  if (root <= 0.0) return d;
  std::vector<Symbol> ctx = history_;
  double log_w = 0.0;
  int idx = 0;
  std::vector<double> w;
  for (std::size_t k = 0; k < block_.size(); ++k) {
    const auto& members = block_[k].members();
    if (idx >= 0 && nodes_[idx].expanded) {
      const Node& node = nodes_[idx];
      if (node.mass <= 0.0) return d;
      w.assign(node.q.size(), 0.0);
      double total = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] = node.q[j] * (node.child[j] < 0 ? 1.0 : nodes_[node.child[j]].remaining);
        total += w[j];
      }
      const std::size_t j = draw_index(w, total, rng);
      log_w += std::log(node.mass);
      ctx.push_back(members[j]);
      idx = node.child[j];
    } else {
      const auto step = proposal_next_dist(*model_, block_[k], ctx);
      if (step.mass <= 0.0) {
        d.path.assign(ctx.begin() + static_cast<std::ptrdiff_t>(history_.size()), ctx.end());
        return d;
      }
      log_w += std::log(step.mass);
      ctx.push_back(members[draw_index(step.probs, 1.0, rng)]);
      idx = -1;
    }
  }
  d.path.assign(ctx.begin() + static_cast<std::ptrdiff_t>(history_.size()), ctx.end());
  d.weight = std::exp(log_w) * root;
  return d;
}

EstimateSummary hybrid_estimate(const CategoricalModel& model, const Query& query, std::size_t n,
                                std::size_t cap, RngStream rng, std::span<const Symbol> history, int workers) {
  validate_query(query);
  std::vector<PrunedTree> trees;
  double exact = 0.0;
  bool exhausted = true;
  for (const auto& block : query.blocks) {
    trees.emplace_back(model, block, cap, history);
    exact += trees.back().beams().lower_bound();
    if (trees.back().remaining() > 0.0) exhausted = false;
  }
  if (n == 0 || exhausted) {
    EstimateSummary s = make_summary(std::max<std::size_t>(n, 1), exact, 0.0, "hybrid");
    s.n = n;
    s.se = 0.0;
    s.extra.erase("single_sample");
    s.extra[exhausted ? "exhausted" : "lower_bound_only"] = 1.0;
    return s;
  }
  const std::size_t B = trees.size();
  auto sample = [&](std::size_t i) {
    double v = exact;
    for (std::size_t b = 0; b < B; ++b) {
      RngStream r = rng.substream(i * B + b);
      v += trees[b].sample(r).weight;
    }
    return v;
  };
  EstimateSummary s = sample_mean(n, workers, sample, "hybrid");
  s.extra["beam_mass"] = exact;
  return s;
}

HybridDiagnostic hybrid_variance_diagnostic(const CategoricalModel& model, const QueryBlock& block,
                                            const std::vector<std::vector<Symbol>>& beams,
                                            const std::vector<Symbol>& candidate,
                                            std::span<const Symbol> history, double budget) {
  Query q;
  q.vocab = model.vocab_size();
  q.blocks.push_back(block);
  if (enumeration_cost(q) > budget) throw ConfigError("enumeration intractable for the variance diagnostic");
  if (candidate.size() != block.size() || !q.contains(candidate))
    throw ConfigError("candidate path is not in the query block");
  if (std::find(beams.begin(), beams.end(), candidate) != beams.end())
    throw ConfigError("candidate path is already a beam");

  // Enumerate every path with its model mass p and rho = prod_k s_k.
  struct PathInfo {
    std::vector<Symbol> path;
    double p;
    double rho;
  };
  std::vector<PathInfo> paths;
  std::vector<Symbol> path(history.begin(), history.end());
  const std::size_t h = path.size();
  std::function<void(std::size_t, double, double)> walk = [&](std::size_t k, double p, double rho) {
    if (k == block.size()) {
      paths.push_back({{path.begin() + static_cast<std::ptrdiff_t>(h), path.end()}, p, rho});
      return;
    }
    const auto step = proposal_next_dist(model, block[k], path);
    const auto& members = block[k].members();
    for (std::size_t j = 0; j < members.size(); ++j) {
      path.push_back(members[j]);
      walk(k + 1, p * step.mass * step.probs[j], rho * step.mass);
      path.pop_back();
    }
  };
  walk(0, 1.0, 1.0);

  auto in_beams = [&](const std::vector<Symbol>& x) { return std::find(beams.begin(), beams.end(), x) != beams.end(); };
  double q_beams = 0.0, rest_mass = 0.0, rest_weighted = 0.0;
  double p_hat = 0.0, rho_hat = 0.0;
  for (const auto& info : paths) {
    const double qx = info.rho > 0.0 ? info.p / info.rho : 0.0;
    if (in_beams(info.path)) {
      q_beams += qx;
    } else if (info.path == candidate) {
      p_hat = info.p;
      rho_hat = info.rho;
    } else {
      rest_mass += info.p;
      rest_weighted += info.p * info.rho;
    }
  }
  HybridDiagnostic d;
  if (p_hat == 0.0) return d;  // adding a zero-mass path leaves the variance unchanged
  d.lhs = 2.0 * rest_mass - rest_weighted / rho_hat;
  d.rhs = (1.0 - q_beams) * rho_hat - p_hat;
  d.reduces = d.lhs <= d.rhs;
  return d;
}

EstimateSummary surrogate_ground_truth(const Sampler& sampler, const GroundTruthOptions& o) {
  if (!(o.delta > 0.0)) throw ConfigError("tolerance must be positive");
  if (o.n_low < 1 || o.n_low > o.n_high) throw ConfigError("need 1 <= n_low <= n_high");
  if (o.step < 1) throw ConfigError("step must be >= 1");
  Accumulator acc;
  std::size_t drawn = 0;
  auto draw = [&](std::size_t count) {
    const auto values = parallel_map<double>(count, o.workers, [&](std::size_t i) { return sampler(drawn + i); });
    for (double v : values) acc.add(v);
    drawn += count;
  };
  draw(o.n_low);
  while (acc.variance() / static_cast<double>(drawn) >= o.delta && drawn < o.n_high)
    draw(std::min(o.step, o.n_high - drawn));
  EstimateSummary s = acc.summary("ground_truth");
  s.extra["tolerance_met"] = acc.variance() / static_cast<double>(drawn) < o.delta ? 1.0 : 0.0;
  return s;
}

}  // namespace lrq
