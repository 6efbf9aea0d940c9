#include "lrq/jump.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "lrq/error.hpp"

namespace lrq {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// ---------------------------------------------------------------- regions

bool Interval::contains(double v) const {
  if (lo_open ? !(v > lo) : !(v >= lo)) return false;
  return hi_open ? v < hi : v <= hi;
}

bool Interval::empty() const {
  if (lo > hi) return true;
  return lo == hi && (lo_open || hi_open);
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (k >= x.size() || !axes[k].contains(x[k])) return false;
  }
  return true;
}

bool Box::empty() const {
  return std::any_of(axes.begin(), axes.end(), [](const Interval& iv) { return iv.empty(); });
}

double Box::gaussian_mass(std::span<const double> mean, std::span<const double> scale) const {
  double mass = 1.0;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    const Interval& iv = axes[k];
    const double s = k < scale.size() ? scale[k] : 0.0;
    if (s <= 0.0) {
      if (!iv.contains(mean[k])) return 0.0;
      continue;
    }
    const double hi = std::isinf(iv.hi) ? (iv.hi > 0 ? 1.0 : 0.0) : normal_cdf((iv.hi - mean[k]) / s);
    const double lo = std::isinf(iv.lo) ? (iv.lo > 0 ? 1.0 : 0.0) : normal_cdf((iv.lo - mean[k]) / s);
    mass *= std::max(0.0, hi - lo);
    if (mass == 0.0) return 0.0;
  }
  return mass;
}

Region::Region(std::vector<Box> boxes) {
  for (auto& b : boxes) {
    if (!b.empty()) boxes_.push_back(std::move(b));
  }
}

Region Region::at_least(double c, int dim, int axis) {
  if (axis < 0 || axis >= dim) throw ConfigError("region axis out of range");
  Box b;
  b.axes.resize(static_cast<std::size_t>(axis) + 1);
  b.axes[axis].lo = c;
  return box(std::move(b));
}

Region Region::below(double c, int dim, int axis) {
  if (axis < 0 || axis >= dim) throw ConfigError("region axis out of range");
  Box b;
  b.axes.resize(static_cast<std::size_t>(axis) + 1);
  b.axes[axis].hi = c;
  b.axes[axis].hi_open = true;
  return box(std::move(b));
}

Region Region::vertices(std::span<const int> vs) {
  std::vector<Box> boxes;
  for (int v : vs) {
    Box b;
    b.axes.push_back({static_cast<double>(v), static_cast<double>(v)});
    boxes.push_back(std::move(b));
  }
  return Region(std::move(boxes));
}

Region Region::everything() { return box(Box{}); }

bool Region::contains(std::span<const double> x) const {
  return std::any_of(boxes_.begin(), boxes_.end(), [&](const Box& b) { return b.contains(x); });
}

double Region::gaussian_mass(std::span<const double> mean, std::span<const double> scale) const {
  double m = 0.0;
  for (const auto& b : boxes_) m += b.gaussian_mass(mean, scale);
  return std::min(m, 1.0);
}

Region Region::unite(const Region& other) const {
  std::vector<Box> all = boxes_;
  all.insert(all.end(), other.boxes_.begin(), other.boxes_.end());
  return Region(std::move(all));
}

namespace {

Interval intersect_interval(const Interval& a, const Interval& b) {
  Interval r;
  if (a.lo > b.lo || (a.lo == b.lo && a.lo_open)) {
    r.lo = a.lo;
    r.lo_open = a.lo_open;
  } else {
    r.lo = b.lo;
    r.lo_open = b.lo_open;
  }
  if (a.hi < b.hi || (a.hi == b.hi && a.hi_open)) {
    r.hi = a.hi;
    r.hi_open = a.hi_open;
  } else {
    r.hi = b.hi;
    r.hi_open = b.hi_open;
  }
  return r;
}

}  // namespace

Region Region::intersect(const Region& other) const {
  std::vector<Box> out;
  for (const auto& a : boxes_) {
    for (const auto& b : other.boxes_) {
      Box c;
      c.axes.resize(std::max(a.axes.size(), b.axes.size()));
      for (std::size_t k = 0; k < c.axes.size(); ++k) {
        const Interval ia = k < a.axes.size() ? a.axes[k] : Interval{};
        const Interval ib = k < b.axes.size() ? b.axes[k] : Interval{};
        c.axes[k] = intersect_interval(ia, ib);
      }
      out.push_back(std::move(c));
    }
  }
  return Region(std::move(out));
}

// ---------------------------------------------------------------- process base

void JumpProcess::drift(const PathState&, std::span<double> out) const { std::fill(out.begin(), out.end(), 0.0); }

void JumpProcess::diffusion(const PathState&, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

double JumpProcess::dominating_rate(const PathState&, double) const {
  throw ConfigError("process " + name() + " has no dominating rate; use Euler mode");
}

std::vector<MarkNode> JumpProcess::mark_nodes(const PathState&) const { return {}; }

double JumpProcess::jump_region_mass(const PathState&, const Region&) const { return -1.0; }

double JumpProcess::euler_jump_mass(const PathState&, const Region&, std::span<const double>,
                                    std::span<const double>) const {
  return -1.0;
}

void JumpProcess::apply_jump(PathState& s, std::vector<double> mark) const {
  const auto inc = increment(s, mark);
  for (std::size_t k = 0; k < s.x.size(); ++k) s.x[k] += inc[k];
  s.jump_times.push_back(s.t);
  s.jump_marks.push_back(std::move(mark));
}

double jump_hit_probability(const JumpProcess& p, const PathState& s, const Region& region, int inner,
                            RngStream& rng) {
  if (region.empty()) return 0.0;
  const double closed = p.jump_region_mass(s, region);
  if (closed >= 0.0) return closed;
  std::vector<double> y(s.x.size());
  const auto nodes = p.mark_nodes(s);
  if (!nodes.empty()) {
    double m = 0.0;
    for (const auto& nd : nodes) {
      for (std::size_t k = 0; k < y.size(); ++k) y[k] = s.x[k] + nd.increment[k];
      if (region.contains(y)) m += nd.weight;
    }
    return std::min(m, 1.0);
  }
  if (inner <= 0) throw ConfigError("inner sample count must be positive");
  int hits = 0;
  for (int i = 0; i < inner; ++i) {
    const auto mark = p.sample_mark(s, rng);
    const auto inc = p.increment(s, mark);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = s.x[k] + inc[k];
    hits += region.contains(y) ? 1 : 0;
  }
  return static_cast<double>(hits) / inner;
}

namespace {

void check_rate(double lambda, double dt) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw NumericError("jump intensity is negative or not finite");
  if (lambda * dt > 1.0 + 1e-12) throw NumericError("step too coarse for intensity");
}

}  // namespace

EulerHitParts euler_hit_parts(const JumpProcess& p, const PathState& s, const Region& region, double dt, int inner,
                              RngStream& rng) {
  EulerHitParts out;
  if (region.empty()) return out;
  const std::size_t d = s.x.size();
  std::vector<double> mu(d), sig(d), base(d), y(d);
  p.drift(s, mu);
  p.diffusion(s, sig);
  const double root = std::sqrt(dt);
  bool still = true;
  for (std::size_t k = 0; k < d; ++k) {
    base[k] = s.x[k] + mu[k] * dt;
    sig[k] *= root;
    still = still && mu[k] == 0.0 && sig[k] == 0.0;
  }
  const double lambda = p.jump_rate(s);
  check_rate(lambda, dt);
  const double pj = lambda * dt;
  out.no_jump = (1.0 - pj) * region.gaussian_mass(base, sig);
  if (pj == 0.0) return out;
  if (still) {
    out.jump = pj * jump_hit_probability(p, s, region, inner, rng);
    return out;
  }
  const double special = p.euler_jump_mass(s, region, base, sig);
  if (special >= 0.0) {
    out.jump = std::min(pj * special, 1.0 - out.no_jump);
    return out;
  }
  const auto nodes = p.mark_nodes(s);
  double jm = 0.0;
  if (!nodes.empty()) {
    for (const auto& nd : nodes) {
      for (std::size_t k = 0; k < d; ++k) y[k] = base[k] + nd.increment[k];
      jm += nd.weight * region.gaussian_mass(y, sig);
    }
  } else {
    if (inner <= 0) throw ConfigError("inner sample count must be positive");
    for (int i = 0; i < inner; ++i) {
      const auto inc = p.increment(s, p.sample_mark(s, rng));
      for (std::size_t k = 0; k < d; ++k) y[k] = base[k] + inc[k];
      jm += region.gaussian_mass(y, sig);
    }
    jm /= inner;
  }
  out.jump = std::min(pj * jm, 1.0 - out.no_jump);
  return out;
}

double euler_hit_probability(const JumpProcess& p, const PathState& s, const Region& region, double dt, int inner,
                             RngStream& rng) {
  return euler_hit_parts(p, s, region, dt, inner, rng).total();
}

JumpRecord euler_step(const JumpProcess& p, PathState& s, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw ConfigError("Euler step must be positive");
  const std::size_t d = s.x.size();
  std::vector<double> mu(d), sig(d);
  p.drift(s, mu);
  p.diffusion(s, sig);
  const double lambda = p.jump_rate(s);
  check_rate(lambda, dt);
  const double root = std::sqrt(dt);
  std::vector<double> next(d);
  for (std::size_t k = 0; k < d; ++k) {
    next[k] = s.x[k] + mu[k] * dt;
    if (sig[k] != 0.0) next[k] += sig[k] * root * rng.normal();
  }
  JumpRecord rec;
  if (lambda > 0.0 && rng.uniform() < lambda * dt) {
    rec.jumped = true;
    rec.mark = p.sample_mark(s, rng);
    const auto inc = p.increment(s, rec.mark);
    for (std::size_t k = 0; k < d; ++k) next[k] += inc[k];
  }
  s.x = std::move(next);
  s.t += dt;
  if (rec.jumped) {
    s.jump_times.push_back(s.t);
    s.jump_marks.push_back(rec.mark);
  }
  return rec;
}

Path simulate_path(const JumpProcess& p, double horizon, double dt, RngStream& rng) {
  if (!(horizon >= 0.0)) throw ConfigError("horizon must be nonnegative");
  PathState s;
  s.x = p.x0();
  Path path;
  path.times.push_back(0.0);
  path.states.push_back(s.x);
  path.jumped.push_back(0);
  if (dt > 0.0) {
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    for (std::size_t i = 1; i <= steps; ++i) {
      const auto rec = euler_step(p, s, dt, rng);
      s.t = static_cast<double>(i) * dt;
      if (rec.jumped) s.jump_times.back() = s.t;
      path.times.push_back(s.t);
      path.states.push_back(s.x);
      path.jumped.push_back(rec.jumped ? 1 : 0);
    }
    return path;
  }
  if (!p.pure_jump()) throw ConfigError("exact simulation needs a pure-jump process");
  while (s.t < horizon) {
    const double seg_end = std::min(horizon, s.t + 1.0);
    const double c = p.dominating_rate(s, seg_end);
    if (!(c > 0.0)) {
      s.t = seg_end;
      continue;
    }
    const double cand = s.t + rng.exponential(c);
    if (cand > seg_end) {
      s.t = seg_end;
      continue;
    }
    s.t = cand;
    const double lambda = p.jump_rate(s);
    if (lambda > c * (1.0 + 1e-9)) throw NumericError("dominating rate violated");
    if (rng.uniform() * c >= lambda) continue;
    p.apply_jump(s, p.sample_mark(s, rng));
    path.times.push_back(s.t);
    path.states.push_back(s.x);
    path.jumped.push_back(1);
  }
  return path;
}

// ---------------------------------------------------------------- hitting times

Ght Ght::hit(Region r) {
  Ght g;
  g.region = std::move(r);
  return g;
}

Ght Ght::min_of(std::vector<Ght> ts) {
  if (ts.empty()) throw ConfigError("min of no hitting times");
  Ght g;
  g.kind = Kind::min;
  g.children = std::move(ts);
  return g;
}

Ght Ght::max_of(std::vector<Ght> ts) {
  if (ts.empty()) throw ConfigError("max of no hitting times");
  Ght g;
  g.kind = Kind::max;
  g.children = std::move(ts);
  return g;
}

Ght Ght::after(Region r, Ght prereq) {
  Ght g;
  g.kind = Kind::after;
  g.region = std::move(r);
  g.children.push_back(std::move(prereq));
  return g;
}

Ght Ght::first_if_after(Region r, Ght other) {
  Ght g = after(std::move(r), std::move(other));
  g.kind = Kind::first_if_after;
  return g;
}

Ght Ght::first_if_before(Region r, Ght other) {
  Ght g = after(std::move(r), std::move(other));
  g.kind = Kind::first_if_before;
  return g;
}

GhtTracker::GhtTracker(const Ght& g) { build(g); }

int GhtTracker::build(const Ght& g) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{g.kind, g.region, {}});
  for (const auto& c : g.children) {
    const int cid = build(c);
    nodes_[id].children.push_back(cid);
  }
  return id;
}

void GhtTracker::update(int i, double t, std::span<const double> x, bool& changed) {
  Node& n = nodes_[i];
  if (n.kind == Ght::Kind::hit) {
    if (n.time == kNotHit && n.region.contains(x)) {
      n.time = t;
      changed = true;
    }
    return;
  }
  if (n.kind == Ght::Kind::min || n.kind == Ght::Kind::max) {
    for (int c : n.children) update(c, t, x, changed);
    if (n.time != kNotHit) return;
    double agg = n.kind == Ght::Kind::min ? kNotHit : 0.0;
    for (int c : n.children) {
      const double ct = nodes_[c].time;
      agg = n.kind == Ght::Kind::min ? std::min(agg, ct) : std::max(agg, ct);
    }
    if (agg != kNotHit) {
      n.time = agg;
      changed = true;
    }
    return;
  }
  const int pre = n.children[0];
  const bool was = nodes_[pre].time != kNotHit;
  update(pre, t, x, changed);
  if (n.time != kNotHit || n.dead || !n.region.contains(x)) {
    if (n.kind == Ght::Kind::first_if_before && was && !n.dead && n.time == kNotHit) n.dead = true;
    return;
  }
  switch (n.kind) {
    case Ght::Kind::after:
      if (was) {
        n.time = t;
        changed = true;
      }
      break;
    case Ght::Kind::first_if_after:
      if (was) {
        n.time = t;
        changed = true;
      } else {
        n.dead = true;
      }
      break;
    case Ght::Kind::first_if_before:
      // a tie with the other time counts as "before"
      if (was) {
        n.dead = true;
      } else {
        n.time = t;
        changed = true;
      }
      break;
    default:
      break;
  }
}

bool GhtTracker::observe(double t, std::span<const double> x) {
  // Repeat so that a region activated by a prerequisite realized at t can
  // itself realize at t when the state already lies inside it.
  bool any = false;
  for (std::size_t pass = 0; pass <= nodes_.size(); ++pass) {
    bool changed = false;
    const auto dead_before = dead_count();
    update(0, t, x, changed);
    changed = changed || dead_count() != dead_before;
    any = any || changed;
    if (!changed) break;
  }
  return any;
}

std::size_t GhtTracker::dead_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.dead; }));
}

Region GhtTracker::node_region(int i) const {
  const Node& n = nodes_[i];
  if (n.time != kNotHit || n.dead) return {};
  switch (n.kind) {
    case Ght::Kind::hit:
      return n.region;
    case Ght::Kind::min: {
      Region r;
      for (int c : n.children) r = r.unite(node_region(c));
      return r;
    }
    case Ght::Kind::max: {
      bool first = true;
      Region r;
      for (int c : n.children) {
        if (nodes_[c].time != kNotHit) continue;
        const Region cr = node_region(c);
        r = first ? cr : r.intersect(cr);
        first = false;
        if (r.empty()) return {};
      }
      return r;
    }
    case Ght::Kind::after:
    case Ght::Kind::first_if_after:
      return nodes_[n.children[0]].time != kNotHit ? n.region : Region{};
    case Ght::Kind::first_if_before:
      return nodes_[n.children[0]].time == kNotHit ? n.region : Region{};
  }
  return {};
}

Region GhtTracker::region() const { return node_region(0); }

double evaluate_ght(const Path& path, const Ght& g) {
  GhtTracker tr(g);
  for (std::size_t i = 0; i < path.times.size() && !tr.realized(); ++i) tr.observe(path.times[i], path.states[i]);
  return tr.time();
}

double hitting_intensity(const JumpProcess& p, const GhtTracker& tracker, const PathState& s, int inner,
                         RngStream& rng) {
  if (tracker.realized()) return 0.0;
  const Region r = tracker.region();
  if (r.empty()) return 0.0;
  const double lambda = p.jump_rate(s);
  if (lambda == 0.0) return 0.0;
  return lambda * jump_hit_probability(p, s, r, inner, rng);
}

// ---------------------------------------------------------------- quadrature

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ConfigError("quadrature order must be positive");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = es.eigenvalues()(i);
    weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ConfigError("quadrature order must be positive");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
    weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

// ---------------------------------------------------------------- examples

MertonProcess::MertonProcess(MertonParams p) : p_(p) {
  if (!(p_.x0 > 0.0) || p_.sigma < 0.0 || p_.delta < 0.0 || p_.lambda < 0.0)
    throw ConfigError("merton: need x0 > 0 and nonnegative sigma, delta, lambda");
  k_ = std::exp(p_.mu + 0.5 * p_.delta * p_.delta) - 1.0;
  gauss_hermite(p_.quadrature, znodes_, zweights_);
  if (p_.delta > 0.0) {
    nodes_ = znodes_;
    weights_ = zweights_;
  } else {
    nodes_ = {0.0};
    weights_ = {1.0};
  }
}

double MertonProcess::euler_jump_mass(const PathState& s, const Region& region, std::span<const double> mean,
                                      std::span<const double> scale) const {
  const double x = s.x[0];
  if (!(x > 0.0) || !(p_.delta > 0.0)) return -1.0;
  // P(Y in [lo', hi']) for lognormal Y, averaged over the diffusion by quadrature
  auto cdf = [&](double u) {
    if (u <= 0.0) return 0.0;
    if (std::isinf(u)) return 1.0;
    return normal_cdf((std::log(u) - p_.mu) / p_.delta);
  };
  const bool noisy = scale[0] > 0.0;
  const std::size_t m = noisy ? znodes_.size() : 1;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double y0 = mean[0] + (noisy ? scale[0] * znodes_[i] : 0.0);
    const double w = noisy ? zweights_[i] : 1.0;
    double mass = 0.0;
    for (const auto& b : region.boxes()) {
      const Interval iv = b.axes.empty() ? Interval{} : b.axes[0];
      mass += cdf(1.0 + (iv.hi - y0) / x) - cdf(1.0 + (iv.lo - y0) / x);
    }
    total += w * mass;
  }
  return std::clamp(total, 0.0, 1.0);
}

void MertonProcess::drift(const PathState& s, std::span<double> out) const {
  double rate = p_.r - p_.lambda * k_;
  if (p_.printed_drift) rate -= 0.5 * p_.sigma * p_.sigma;
  out[0] = rate * s.x[0];
}

void MertonProcess::diffusion(const PathState& s, std::span<double> out) const { out[0] = p_.sigma * s.x[0]; }

std::vector<double> MertonProcess::sample_mark(const PathState&, RngStream& rng) const {
  return {p_.mu + p_.delta * rng.normal()};
}

std::vector<double> MertonProcess::increment(const PathState& s, std::span<const double> mark) const {
  return {std::expm1(mark[0]) * s.x[0]};
}

std::vector<MarkNode> MertonProcess::mark_nodes(const PathState& s) const {
  std::vector<MarkNode> out;
  out.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    out.push_back({weights_[i], {std::expm1(p_.mu + p_.delta * nodes_[i]) * s.x[0]}});
  }
  return out;
}

DriftExitProcess::DriftExitProcess(DriftExitParams p) : p_(p) {
  if (!(p_.x0 > 0.0) || p_.b < 0.0 || !(p_.c > 0.0)) throw ConfigError("drift_exit: need x0 > 0, b >= 0, c > 0");
  gauss_legendre01(p_.quadrature, nodes_, weights_);
}

void DriftExitProcess::drift(const PathState& s, std::span<double> out) const { out[0] = p_.b * s.t * s.x[0]; }

void DriftExitProcess::diffusion(const PathState& s, std::span<double> out) const { out[0] = s.x[0]; }

double DriftExitProcess::jump_rate(const PathState& s) const {
  return std::exp(s.t - static_cast<double>(s.jump_times.size()));
}

std::vector<double> DriftExitProcess::sample_mark(const PathState&, RngStream& rng) const { return {rng.uniform()}; }

std::vector<double> DriftExitProcess::increment(const PathState& s, std::span<const double> mark) const {
  return {-mark[0] * s.x[0]};
}

std::vector<MarkNode> DriftExitProcess::mark_nodes(const PathState& s) const {
  std::vector<MarkNode> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) out.push_back({weights_[i], {-nodes_[i] * s.x[0]}});
  return out;
}

namespace {

// E[(m + b z)^+] for standard normal z
double ramp_mean(double m, double b) {
  if (std::isinf(m)) return m > 0 ? m : 0.0;
  b = std::abs(b);
  if (b == 0.0) return std::max(m, 0.0);
  const double u = m / b;
  return m * normal_cdf(u) + b * std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

// E[clip(m + b z, 0, 1)]
double clip_mean(double m, double b) {
  if (std::isinf(m)) return m > 0 ? 1.0 : 0.0;
  return ramp_mean(m, b) - ramp_mean(m - 1.0, b);
}

}  // namespace

double DriftExitProcess::euler_jump_mass(const PathState& s, const Region& region, std::span<const double> mean,
                                         std::span<const double> scale) const {
  // y = mean + scale z - U x with U uniform: the admissible U range has
  // endpoints linear in z, so the probability is a difference of clipped means.
  const double x = s.x[0];
  if (x == 0.0) return -1.0;
  const double ax = std::abs(x);
  const double sgn = x > 0 ? 1.0 : -1.0;
  double total = 0.0;
  for (const auto& b : region.boxes()) {
    const Interval iv = b.axes.empty() ? Interval{} : b.axes[0];
    // U x in [mean + s z - hi, mean + s z - lo]
    const double lo_end = x > 0 ? (mean[0] - iv.hi) : (iv.lo - mean[0]);
    const double hi_end = x > 0 ? (mean[0] - iv.lo) : (iv.hi - mean[0]);
    const double slope = sgn * scale[0] / ax;
    total += clip_mean(hi_end / ax, slope) - clip_mean(lo_end / ax, slope);
  }
  return std::clamp(total, 0.0, 1.0);
}

Ght DriftExitProcess::exit_time() const {
  return Ght::after(Region::below(p_.c), Ght::hit(Region::at_least(p_.c)));
}

CtmcProcess::CtmcProcess(std::vector<std::vector<double>> transition, double rate, int start)
    : p_(std::move(transition)), rate_(rate), start_(start) {
  const std::size_t n = p_.size();
  if (n == 0) throw ConfigError("ctmc: need at least one vertex");
  if (!(rate_ > 0.0)) throw ConfigError("ctmc: rate must be positive");
  if (start_ < 0 || static_cast<std::size_t>(start_) >= n) throw ConfigError("ctmc: start vertex out of range");
  for (const auto& row : p_) {
    if (row.size() != n) throw ConfigError("ctmc: transition matrix must be square");
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw ConfigError("ctmc: transition probabilities must be nonnegative");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("ctmc: transition rows must sum to 1");
  }
}

CtmcProcess CtmcProcess::random(const CtmcParams& p, RngStream& rng) {
  if (p.vertices < 1) throw ConfigError("ctmc: need at least one vertex");
  if (!(p.temperature > 0.0)) throw ConfigError("ctmc: temperature must be positive");
  std::vector<std::vector<double>> rows(p.vertices, std::vector<double>(p.vertices));
  for (auto& row : rows) {
    std::vector<double> z(row.size());
    for (auto& v : z) v = rng.uniform() / p.temperature;
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) total += row[j] = std::exp(z[j] - top);
    for (auto& v : row) v /= total;
  }
  return CtmcProcess(std::move(rows), p.rate, p.start);
}

std::vector<double> CtmcProcess::sample_mark(const PathState& s, RngStream& rng) const {
  const auto& row = p_[static_cast<std::size_t>(s.x[0])];
  return {static_cast<double>(draw_index(row, 1.0, rng))};
}

std::vector<double> CtmcProcess::increment(const PathState& s, std::span<const double> mark) const {
  return {mark[0] - s.x[0]};
}

std::vector<MarkNode> CtmcProcess::mark_nodes(const PathState& s) const {
  const auto& row = p_[static_cast<std::size_t>(s.x[0])];
  std::vector<MarkNode> out;
  for (std::size_t v = 0; v < row.size(); ++v) {
    if (row[v] > 0.0) out.push_back({row[v], {static_cast<double>(v) - s.x[0]}});
  }
  return out;
}

Ght CtmcProcess::cover_time() const {
  std::vector<Ght> each;
  for (int v = 0; v < vertices(); ++v) {
    const int vs[] = {v};
    each.push_back(Ght::hit(Region::vertices(vs)));
  }
  return Ght::max_of(std::move(each));
}

GaussHawkesProcess::GaussHawkesProcess(GaussHawkesParams p) : p_(p) {
  if (!(p_.mu > 0.0)) throw ConfigError("gauss_hawkes: mu must be positive");
  if (!(p_.variance_floor > 0.0)) throw ConfigError("gauss_hawkes: variance floor must be positive");
}

double GaussHawkesProcess::jump_rate(const PathState& s) const {
  double lambda = p_.mu;
  for (double S : s.jump_times) lambda += std::exp(-(s.t - S));
  return lambda;
}

double GaussHawkesProcess::dominating_rate(const PathState& s, double) const { return jump_rate(s); }

std::vector<double> GaussHawkesProcess::sample_mark(const PathState& s, RngStream& rng) const {
  std::vector<double> w(s.jump_times.size() + 1);
  w[0] = p_.mu;
  double total = p_.mu;
  for (std::size_t i = 0; i < s.jump_times.size(); ++i) total += w[i + 1] = std::exp(-(s.t - s.jump_times[i]));
  const std::size_t c = draw_index(w, total, rng);
  std::vector<double> m(3, 0.0);
  double sd = 1.0;
  if (c > 0) {
    const double lag = s.t - s.jump_times[c - 1];
    sd = std::sqrt(std::max(lag * lag, p_.variance_floor));
    m = s.jump_marks[c - 1];
  }
  for (auto& v : m) v += sd * rng.normal();
  return m;
}

std::vector<double> GaussHawkesProcess::increment(const PathState& s, std::span<const double> mark) const {
  return {mark[0] - s.x[0], mark[1] - s.x[1], mark[2] - s.x[2]};
}

double GaussHawkesProcess::jump_region_mass(const PathState& s, const Region& region) const {
  if (region.empty()) return 0.0;
  const double zero[3] = {0.0, 0.0, 0.0};
  const double one[3] = {1.0, 1.0, 1.0};
  double total = p_.mu;
  double mass = p_.mu * region.gaussian_mass(zero, one);
  for (std::size_t i = 0; i < s.jump_times.size(); ++i) {
    const double lag = s.t - s.jump_times[i];
    const double w = std::exp(-lag);
    const double sd = std::sqrt(std::max(lag * lag, p_.variance_floor));
    const double scale[3] = {sd, sd, sd};
    total += w;
    mass += w * region.gaussian_mass(s.jump_marks[i], scale);
  }
  return std::min(1.0, mass / total);
}

Region GaussHawkesProcess::orthant(int index) {
  // sign of each coordinate: +1 means [0.5, inf), -1 means (-inf, -0.5]
  static const int signs[5][3] = {{1, 1, 1}, {-1, 1, 1}, {-1, -1, 1}, {1, -1, 1}, {1, -1, -1}};
  if (index < 1 || index > 5) throw ConfigError("gauss_hawkes: orthant index must be in 1..5");
  Box b;
  for (int k = 0; k < 3; ++k) {
    Interval iv;
    if (signs[index - 1][k] > 0) {
      iv.lo = 0.5;
    } else {
      iv.hi = -0.5;
    }
    b.axes.push_back(iv);
  }
  return Region::box(std::move(b));
}

PoissonJumpProcess::PoissonJumpProcess(std::vector<double> rates) : rates_(std::move(rates)), total_(0.0) {
  if (rates_.empty()) throw ConfigError("poisson: need at least one coordinate");
  for (double r : rates_) {
    if (!(r >= 0.0)) throw ConfigError("poisson: rates must be nonnegative");
    total_ += r;
  }
}

std::vector<double> PoissonJumpProcess::sample_mark(const PathState&, RngStream& rng) const {
  return {static_cast<double>(draw_index(rates_, total_, rng))};
}

std::vector<double> PoissonJumpProcess::increment(const PathState& s, std::span<const double> mark) const {
  std::vector<double> inc(s.x.size(), 0.0);
  inc[static_cast<std::size_t>(mark[0])] = 1.0;
  return inc;
}

std::vector<MarkNode> PoissonJumpProcess::mark_nodes(const PathState& s) const {
  std::vector<MarkNode> out;
  if (total_ == 0.0) return out;
  for (std::size_t k = 0; k < rates_.size(); ++k) {
    if (rates_[k] == 0.0) continue;
    std::vector<double> inc(s.x.size(), 0.0);
    inc[k] = 1.0;
    out.push_back({rates_[k] / total_, std::move(inc)});
  }
  return out;
}

Ght PoissonJumpProcess::first_jump(int k) const {
  return Ght::hit(Region::at_least(1.0, dim(), k));
}

// ---------------------------------------------------------------- factory

namespace {

double take(std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  params.erase(it);
  return v;
}

}  // namespace

std::unique_ptr<JumpProcess> make_example_process(const std::string& name, const std::map<std::string, double>& given,
                                                  RngStream rng) {
  auto params = given;
  std::unique_ptr<JumpProcess> out;
  if (name == "merton") {
    MertonParams p;
    p.x0 = take(params, "x0", p.x0);
    p.r = take(params, "r", p.r);
    p.mu = take(params, "mu", p.mu);
    p.delta = take(params, "delta", p.delta);
    p.lambda = take(params, "lambda", p.lambda);
    p.sigma = take(params, "sigma", p.sigma);
    p.printed_drift = take(params, "printed_drift", 0.0) != 0.0;
    out = std::make_unique<MertonProcess>(p);
  } else if (name == "drift_exit") {
    DriftExitParams p;
    p.x0 = take(params, "x0", p.x0);
    p.b = take(params, "b", p.b);
    p.c = take(params, "c", p.c);
    out = std::make_unique<DriftExitProcess>(p);
  } else if (name == "ctmc_cover") {
    CtmcParams p;
    p.vertices = static_cast<int>(take(params, "vertices", p.vertices));
    p.rate = take(params, "rate", p.rate);
    p.temperature = take(params, "temperature", p.temperature);
    p.start = static_cast<int>(take(params, "start", p.start));
    out = std::make_unique<CtmcProcess>(CtmcProcess::random(p, rng));
  } else if (name == "gauss_hawkes") {
    GaussHawkesParams p;
    p.mu = take(params, "mu", p.mu);
    p.variance_floor = take(params, "variance_floor", p.variance_floor);
    out = std::make_unique<GaussHawkesProcess>(p);
  } else if (name == "poisson") {
    std::vector<double> rates;
    for (int k = 0;; ++k) {
      auto it = params.find("rate" + std::to_string(k));
      if (it == params.end()) break;
      rates.push_back(it->second);
      params.erase(it);
    }
    if (rates.empty()) rates.push_back(take(params, "rate", 1.0));
    out = std::make_unique<PoissonJumpProcess>(std::move(rates));
  } else {
    throw ConfigError("unknown process '" + name + "'");
  }
  if (!params.empty()) throw ConfigError("unknown parameter '" + params.begin()->first + "' for process " + name);
  return out;
}

}  // namespace lrq
