#include "lrq/hitting_est.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "lrq/error.hpp"
#include "lrq/parallel.hpp"

namespace lrq {

std::string to_string(HitMethod m) {
  switch (m) {
    case HitMethod::NE:
      return "NE";
    case HitMethod::TR:
      return "TR";
    case HitMethod::IS:
      return "IS";
    case HitMethod::ISP:
      return "ISP";
  }
  return "?";
}

HitMethod parse_hit_method(const std::string& s) {
  if (s == "NE") return HitMethod::NE;
  if (s == "TR") return HitMethod::TR;
  if (s == "IS") return HitMethod::IS;
  if (s == "ISP") return HitMethod::ISP;
  throw ConfigError("unknown hitting-time method '" + s + "'");
}

namespace {

struct Status {
  std::vector<char> realized;
  int stage = 0;  // leading hitting times realized in index order
  bool broken = false;
};

/// What a sample path tracks: which hitting times the proposal forbids and
/// when the integrand of the target hitting time is switched on.
struct Plan {
  bool proposal = false;
  bool integrals = false;
  bool ordered = false;  // realizations out of index order void the sample
  int target = 0;
  std::function<void(const Status&, std::vector<char>&)> forbid;
  std::function<bool(const Status&)> active;
};

struct Trace {
  std::vector<double> hit;
  std::vector<double> log_l;     // log likelihood ratio at each grid time
  std::vector<double> comp;      // int lambda^target over active stretches
  std::vector<double> integral;  // int L lambda^target over active stretches
  int ties = 0;
  bool collapsed = false;
};

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("empty time grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) throw ConfigError("grid times must be finite and >= 0");
    if (i > 0 && grid[i] < grid[i - 1]) throw ConfigError("grid must be nondecreasing");
  }
}

void check_options(const JumpProcess& p, const HitOptions& o) {
  if (o.exact) {
    if (!p.pure_jump()) throw ConfigError("exact mode needs a pure-jump process; use Euler mode");
    if (!(o.integration_step > 0.0)) throw ConfigError("integration step must be positive");
  } else if (!(o.dt > 0.0)) {
    throw ConfigError("Euler step must be positive");
  }
  if (o.max_retries < 1) throw ConfigError("max_retries must be positive");
}

class Walker {
 public:
  Walker(const JumpProcess& p, const std::vector<Ght>& ghts, const Plan& plan, const std::vector<double>& grid,
         const HitOptions& o, RngStream rng)
      : p_(p), plan_(plan), grid_(grid), o_(o), rng_(rng), inner_(rng.substream(1)) {
    for (const auto& g : ghts) trackers_.emplace_back(g);
    status_.realized.assign(ghts.size(), 0);
    forbid_.assign(ghts.size(), 0);
    tr_.hit.assign(ghts.size(), kNotHit);
    tr_.log_l.assign(grid.size(), 0.0);
    tr_.comp.assign(grid.size(), 0.0);
    tr_.integral.assign(grid.size(), 0.0);
  }

  Trace run() {
    s_.x = p_.x0();
    s_.t = 0.0;
    observe(0.0);
    if (o_.exact) {
      run_exact();
    } else {
      run_euler();
    }
    return std::move(tr_);
  }

 private:
  void refresh_regions() {
    forbidden_ = Region{};
    std::fill(forbid_.begin(), forbid_.end(), 0);
    if (plan_.proposal && !status_.broken) {
      plan_.forbid(status_, forbid_);
      for (std::size_t i = 0; i < trackers_.size(); ++i) {
        if (forbid_[i]) forbidden_ = forbidden_.unite(trackers_[i].region());
      }
    }
    active_ = plan_.integrals && !status_.broken && plan_.active(status_);
    target_ = active_ ? trackers_[plan_.target].region() : Region{};
    shared_ = active_ && plan_.proposal && !status_.broken;
    for (std::size_t i = 0; i < forbid_.size() && shared_; ++i) {
      shared_ = (forbid_[i] != 0) == (static_cast<int>(i) == plan_.target);
    }
  }

  /// Feeds the current state to every tracker; returns true if a hitting
  /// time forbidden before the observation realized.
  bool observe(double t) {
    int fresh = 0;
    bool forbidden_hit = false, changed = false;
    std::vector<int> order;
    for (std::size_t i = 0; i < trackers_.size(); ++i) {
      if (status_.realized[i]) continue;
      changed = trackers_[i].observe(t, s_.x) || changed;
      if (trackers_[i].realized()) {
        status_.realized[i] = 1;
        tr_.hit[i] = trackers_[i].time();
        order.push_back(static_cast<int>(i));
        forbidden_hit = forbidden_hit || forbid_[i];
        ++fresh;
      }
    }
    if (fresh > 1) ++tr_.ties;
    if (plan_.ordered) {
      if (fresh > 1) status_.broken = true;
      for (int i : order) {
        if (i == status_.stage) {
          ++status_.stage;
        } else {
          status_.broken = true;
        }
      }
    }
    if (changed) refresh_regions();
    return forbidden_hit;
  }

  bool all_realized() const {
    return std::all_of(status_.realized.begin(), status_.realized.end(), [](char c) { return c != 0; });
  }

  // ---------------------------------------------------------------- Euler

  void run_euler() {
    refresh_regions();
    const double horizon = grid_.back();
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / o_.dt - 1e-9));
    std::vector<std::size_t> at(grid_.size());
    for (std::size_t g = 0; g < grid_.size(); ++g) at[g] = static_cast<std::size_t>(std::floor(grid_[g] / o_.dt + 1e-9));
    double log_l = 0.0, comp = 0.0, integral = 0.0;
    std::size_t next = 0;
    auto record = [&](std::size_t step) {
      while (next < grid_.size() && at[next] <= step) {
        tr_.log_l[next] = log_l;
        tr_.comp[next] = comp;
        tr_.integral[next] = integral;
        ++next;
      }
    };
    record(0);
    for (std::size_t i = 1; i <= steps && next < grid_.size(); ++i) {
      if (!plan_.proposal && all_realized()) break;
      EulerHitParts tparts;
      if (active_ && !target_.empty()) {
        tparts = euler_hit_parts(p_, s_, target_, o_.dt, o_.inner_samples, inner_);
        const double pt = tparts.total();
        comp += pt;
        if (!tr_.collapsed) integral += pt * std::exp(log_l);
      }
      const bool restrict = plan_.proposal && !forbidden_.empty() && !tr_.collapsed;
      if (restrict) {
        const auto parts =
            shared_ ? tparts : euler_hit_parts(p_, s_, forbidden_, o_.dt, o_.inner_samples, inner_);
        const double pf = o_.condition_diffusion ? parts.total() : parts.jump;
        if (pf >= 1.0) {
          tr_.collapsed = true;
          log_l = -std::numeric_limits<double>::infinity();
        } else {
          log_l += std::log1p(-pf);
        }
      }
      bool jumped = false;
      if (restrict && !tr_.collapsed) {
        const auto x = s_.x;
        const double t = s_.t;
        const std::size_t njumps = s_.jump_times.size();
        bool ok = false;
        for (int a = 0; a < o_.max_retries && !ok; ++a) {
          if (a > 0) {
            s_.x = x;
            s_.t = t;
            s_.jump_times.resize(njumps);
            s_.jump_marks.resize(njumps);
          }
          jumped = euler_step(p_, s_, o_.dt, rng_).jumped;
          ok = !(forbidden_.contains(s_.x) && (o_.condition_diffusion || jumped));
        }
        if (!ok) {
          tr_.collapsed = true;
          log_l = -std::numeric_limits<double>::infinity();
        }
      } else {
        jumped = euler_step(p_, s_, o_.dt, rng_).jumped;
      }
      s_.t = static_cast<double>(i) * o_.dt;
      if (jumped) s_.jump_times.back() = s_.t;
      const bool bad = observe(s_.t);
      if (bad && restrict && !tr_.collapsed && o_.condition_diffusion)
        throw NumericError("proposal produced a forbidden jump");
      record(i);
    }
    record(std::numeric_limits<std::size_t>::max());
  }

  // ---------------------------------------------------------------- exact

  double rate_at(double u, const Region& r) {
    if (r.empty()) return 0.0;
    s_.t = u;
    const double lambda = p_.jump_rate(s_);
    if (lambda == 0.0) return 0.0;
    return lambda * jump_hit_probability(p_, s_, r, o_.inner_samples, inner_);
  }

  /// One trapezoid panel [t_, node] in the survival variable.
  void panel(double node, double f1, double g1) {
    const double h = node - t_;
    const double dlam = 0.5 * (left_f_ + f1) * h;
    comp_ += 0.5 * (left_g_ + g1) * h;
    if (left_g_ > 0.0 || g1 > 0.0) {
      const double s0 = std::exp(log_l_);
      if (left_f_ > 0.0 && f1 > 0.0) {
        // exact when the ratio of the two intensities is constant
        const double s1 = std::exp(log_l_ - dlam);
        integral_ += 0.5 * (left_g_ / left_f_ + g1 / f1) * (s0 - s1);
      } else {
        integral_ += 0.5 * (left_g_ * s0 + g1 * std::exp(log_l_ - dlam)) * h;
      }
    }
    log_l_ -= dlam;
    t_ = node;
    s_.t = node;
    left_f_ = f1;
    left_g_ = g1;
  }

  void ensure_left() {
    if (left_valid_) return;
    left_f_ = plan_.proposal ? rate_at(t_, forbidden_) : 0.0;
    left_g_ = shared_ ? left_f_ : active_ ? rate_at(t_, target_) : 0.0;
    left_valid_ = true;
  }

  /// Advances the integrals to t_end. Processes with rates fixed between jumps
  /// integrate in one panel per grid point or event, so the result does not
  /// depend on where rejected thinning candidates fell.
  void integrate_to(double t_end, bool commit) {
    if (p_.constant_between_jumps()) {
      while (next_ < grid_.size() && grid_[next_] <= t_end) {
        ensure_left();
        if (grid_[next_] > t_) panel(grid_[next_], left_f_, left_g_);
        record_exact();
      }
      if (commit && t_end > t_) {
        ensure_left();
        panel(t_end, left_f_, left_g_);
      }
      return;
    }
    while (t_ < t_end) {
      while (next_ < grid_.size() && grid_[next_] <= t_) record_exact();
      double node = std::min(t_end, t_ + o_.integration_step);
      if (next_ < grid_.size()) node = std::min(node, grid_[next_]);
      ensure_left();
      const double f1 = plan_.proposal ? rate_at(node, forbidden_) : 0.0;
      const double g1 = shared_ ? f1 : active_ ? rate_at(node, target_) : 0.0;
      panel(node, f1, g1);
    }
    while (next_ < grid_.size() && grid_[next_] <= t_) record_exact();
  }

  void record_exact() {
    tr_.log_l[next_] = log_l_;
    tr_.comp[next_] = comp_;
    tr_.integral[next_] = integral_;
    ++next_;
  }

  void run_exact() {
    refresh_regions();
    const double horizon = grid_.back();
    t_ = 0.0;
    double clock = 0.0;  // thinning time; t_ may lag it for flat processes
    while (clock < horizon) {
      if (all_realized() && (!plan_.proposal || forbidden_.empty())) break;
      const double seg_end = std::min(horizon, clock + 1.0);
      s_.t = clock;
      const double c = p_.dominating_rate(s_, seg_end);
      const double cand = c > 0.0 ? clock + rng_.exponential(c) : std::numeric_limits<double>::infinity();
      integrate_to(std::min(cand, seg_end), false);
      clock = std::min(cand, seg_end);
      if (cand > seg_end) continue;
      s_.t = cand;
      const double lambda = p_.jump_rate(s_);
      if (lambda > c * (1.0 + 1e-9)) throw NumericError("dominating rate violated");
      if (rng_.uniform() * c >= lambda) continue;
      auto mark = p_.sample_mark(s_, rng_);
      if (plan_.proposal && !forbidden_.empty()) {
        const auto inc = p_.increment(s_, mark);
        std::vector<double> y(s_.x);
        for (std::size_t k = 0; k < y.size(); ++k) y[k] += inc[k];
        if (forbidden_.contains(y)) continue;
      }
      integrate_to(cand, true);
      s_.t = cand;
      p_.apply_jump(s_, std::move(mark));
      if (observe(cand)) throw NumericError("proposal produced a forbidden jump");
      left_valid_ = false;
    }
    while (next_ < grid_.size()) record_exact();
  }

  const JumpProcess& p_;
  const Plan& plan_;
  const std::vector<double>& grid_;
  const HitOptions& o_;
  RngStream rng_, inner_;
  std::vector<GhtTracker> trackers_;
  Status status_;
  std::vector<char> forbid_;
  Region forbidden_, target_;
  bool active_ = false;
  bool shared_ = false;  // the proposal forbids exactly the target region
  PathState s_;
  Trace tr_;
  // exact-mode accumulators
  double t_ = 0.0, log_l_ = 0.0, comp_ = 0.0, integral_ = 0.0;
  double left_f_ = 0.0, left_g_ = 0.0;
  bool left_valid_ = false;
  std::size_t next_ = 0;
};

std::vector<Trace> run_bank(const JumpProcess& p, const std::vector<Ght>& ghts, const Plan& plan,
                            const std::vector<double>& grid, std::size_t n, RngStream rng, const HitOptions& o) {
  return parallel_map<Trace>(n, o.workers, [&](std::size_t i) {
    return Walker(p, ghts, plan, grid, o, rng.substream(i)).run();
  });
}

Plan simple_plan(bool proposal, bool integrals) {
  Plan plan;
  plan.proposal = proposal;
  plan.integrals = integrals;
  plan.target = 0;
  plan.forbid = [](const Status&, std::vector<char>& f) { f[0] = 1; };
  plan.active = [](const Status& s) { return !s.realized[0]; };
  return plan;
}

Plan ordered_plan(int k) {
  Plan plan;
  plan.proposal = true;
  plan.integrals = true;
  plan.ordered = true;
  plan.target = k - 1;
  // forbid every hitting time beyond the next due one, and always the last
  plan.forbid = [k](const Status& s, std::vector<char>& f) {
    for (int i = s.stage + 1; i < k; ++i) f[i] = 1;
    f[k - 1] = 1;
  };
  plan.active = [k](const Status& s) { return s.stage == k - 1; };
  return plan;
}

Plan unordered_plan(int k, int j) {
  Plan plan;
  plan.proposal = true;
  plan.integrals = true;
  plan.target = j;
  plan.forbid = [j](const Status&, std::vector<char>& f) { f[j] = 1; };
  plan.active = [k, j](const Status& s) {
    for (int i = 0; i < k; ++i) {
      if ((i == j) == (s.realized[i] != 0)) return false;
    }
    return true;
  };
  return plan;
}

CdfCurve make_curve(const std::vector<double>& grid, const HitOptions& o, std::string method) {
  CdfCurve c;
  c.grid = grid;
  c.method = std::move(method);
  c.exact = o.exact;
  c.dt = o.exact ? 0.0 : o.dt;
  return c;
}

template <class F>
CdfCurve summarize(const std::vector<Trace>& bank, const std::vector<double>& grid, const HitOptions& o,
                   const std::string& method, F&& value) {
  CdfCurve c = make_curve(grid, o, method);
  std::vector<double> col(bank.size());
  int ties = 0, collapsed = 0;
  for (const auto& tr : bank) {
    ties += tr.ties;
    collapsed += tr.collapsed ? 1 : 0;
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double top = 0.0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      col[i] = value(bank[i], g);
      top = std::max(top, col[i]);
    }
    auto s = mc_accumulate(col, method);
    s.extra["max_sample"] = top;
    if (ties > 0) s.extra["ties"] = ties;
    if (collapsed > 0) s.extra["collapsed"] = collapsed;
    c.points.push_back(std::move(s));
  }
  return c;
}

}  // namespace

std::vector<CdfCurve> cdf_estimate(const JumpProcess& process, const Ght& ght, const std::vector<double>& grid,
                                   std::size_t n, const std::vector<HitMethod>& methods, RngStream rng,
                                   const HitOptions& options) {
  check_grid(grid);
  check_options(process, options);
  if (n == 0) throw ConfigError("sample count must be positive");
  if (methods.empty()) throw ConfigError("no estimation method requested");
  const bool has_diffusion = !process.pure_jump();
  bool want_base = false, want_tr = false, want_prop = false;
  for (auto m : methods) {
    want_base = want_base || m == HitMethod::NE || m == HitMethod::TR;
    want_tr = want_tr || m == HitMethod::TR;
    want_prop = want_prop || m == HitMethod::IS || m == HitMethod::ISP;
    if (m == HitMethod::ISP && has_diffusion && !options.exact && !options.condition_diffusion)
      throw ConfigError("ISP needs the diffusion conditioned away from the region");
  }
  const std::vector<Ght> ghts{ght};
  std::vector<Trace> base, prop;
  if (want_base) base = run_bank(process, ghts, simple_plan(false, want_tr), grid, n, rng.substream(0), options);
  if (want_prop) prop = run_bank(process, ghts, simple_plan(true, true), grid, n, rng.substream(1), options);

  std::vector<CdfCurve> out;
  for (auto m : methods) {
    switch (m) {
      case HitMethod::NE:
        out.push_back(summarize(base, grid, options, "NE", [&](const Trace& tr, std::size_t g) {
          return tr.hit[0] <= grid[g] ? 1.0 : 0.0;
        }));
        break;
      case HitMethod::TR:
        out.push_back(summarize(base, grid, options, "TR", [&](const Trace& tr, std::size_t g) { return tr.comp[g]; }));
        break;
      case HitMethod::IS:
        out.push_back(summarize(prop, grid, options, "IS", [&](const Trace& tr, std::size_t g) {
          const double l = std::exp(tr.log_l[g]);
          if (l > 1.0 + 1e-12) throw NumericError("likelihood ratio exceeds 1");
          const double v = 1.0 - (tr.hit[0] > grid[g] ? l : 0.0);
          return std::clamp(v, 0.0, 1.0);
        }));
        break;
      case HitMethod::ISP:
        out.push_back(summarize(prop, grid, options, "ISP",
                                [&](const Trace& tr, std::size_t g) { return tr.integral[g]; }));
        break;
    }
  }
  return out;
}

CdfCurve ordered_estimate(const JumpProcess& process, const std::vector<Ght>& ghts, const std::vector<double>& grid,
                          std::size_t n, RngStream rng, const HitOptions& options) {
  check_grid(grid);
  check_options(process, options);
  if (ghts.empty()) throw ConfigError("ordered estimate needs at least one hitting time");
  if (n == 0) throw ConfigError("sample count must be positive");
  const Plan plan = ordered_plan(static_cast<int>(ghts.size()));
  const auto bank = run_bank(process, ghts, plan, grid, n, rng, options);
  return summarize(bank, grid, options, "IS_ordered", [](const Trace& tr, std::size_t g) { return tr.integral[g]; });
}

CdfCurve ordered_naive(const JumpProcess& process, const std::vector<Ght>& ghts, const std::vector<double>& grid,
                       std::size_t n, RngStream rng, const HitOptions& options) {
  check_grid(grid);
  check_options(process, options);
  if (ghts.empty()) throw ConfigError("ordered estimate needs at least one hitting time");
  if (n == 0) throw ConfigError("sample count must be positive");
  Plan plan = simple_plan(false, false);
  const auto bank = run_bank(process, ghts, plan, grid, n, rng, options);
  return summarize(bank, grid, options, "NE_ordered", [&](const Trace& tr, std::size_t g) {
    for (std::size_t i = 1; i < tr.hit.size(); ++i) {
      if (!(tr.hit[i - 1] < tr.hit[i])) return 0.0;
    }
    return tr.hit.back() <= grid[g] ? 1.0 : 0.0;
  });
}

EstimateSummary joint_estimate(const JumpProcess& process, const std::vector<Ght>& ghts,
                               const std::vector<double>& times, std::size_t n, JointVariant variant, RngStream rng,
                               const HitOptions& options, int max_ordered) {
  check_options(process, options);
  const int k = static_cast<int>(ghts.size());
  if (k < 1) throw ConfigError("joint estimate needs at least one hitting time");
  if (times.size() != ghts.size()) throw ConfigError("one time per hitting time required");
  if (n == 0) throw ConfigError("sample count must be positive");
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("joint times must be finite and >= 0");
  }
  double mean = 0.0, var = 0.0;
  int terms = 0, ties = 0;
  std::vector<double> col(n);
  auto add_term = [&](const std::vector<Trace>& bank, auto&& value) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = value(bank[i]);
      ties += bank[i].ties;
    }
    const auto s = mc_accumulate(col);
    mean += s.mean;
    var += s.var;
    ++terms;
  };

  if (variant == JointVariant::ordered) {
    if (k > max_ordered)
      throw ConfigError("ordered joint estimate limited to " + std::to_string(max_ordered) + " hitting times");
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t index = 0;
    do {
      std::vector<Ght> order;
      for (int i : perm) order.push_back(ghts[i]);
      const std::vector<double> grid{times[perm.back()]};
      const auto bank = run_bank(process, order, ordered_plan(k), grid, n, rng.substream(index++), options);
      add_term(bank, [&](const Trace& tr) {
        for (int i = 0; i + 1 < k; ++i) {
          if (!(tr.hit[i] <= times[perm[i]])) return 0.0;
        }
        return tr.integral[0];
      });
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    for (int j = 0; j < k; ++j) {
      const std::vector<double> grid{times[j]};
      const auto bank = run_bank(process, ghts, unordered_plan(k, j), grid, n, rng.substream(j), options);
      add_term(bank, [&](const Trace& tr) {
        for (int i = 0; i < k; ++i) {
          if (i != j && !(tr.hit[i] <= times[i])) return 0.0;
        }
        return tr.integral[0];
      });
    }
  }
  auto s = make_summary(n, mean, var, variant == JointVariant::ordered ? "IS_ordered" : "IS_unordered");
  s.extra["terms"] = terms;
  if (ties > 0) s.extra["ties"] = ties;
  return s;
}

EstimateSummary joint_naive(const JumpProcess& process, const std::vector<Ght>& ghts, const std::vector<double>& times,
                            std::size_t n, RngStream rng, const HitOptions& options) {
  check_options(process, options);
  if (ghts.empty()) throw ConfigError("joint estimate needs at least one hitting time");
  if (times.size() != ghts.size()) throw ConfigError("one time per hitting time required");
  if (n == 0) throw ConfigError("sample count must be positive");
  const std::vector<double> grid{*std::max_element(times.begin(), times.end())};
  Plan plan = simple_plan(false, false);
  const auto bank = run_bank(process, ghts, plan, grid, n, rng, options);
  std::vector<double> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 1.0;
    for (std::size_t j = 0; j < ghts.size(); ++j) {
      if (!(bank[i].hit[j] <= times[j])) v = 0.0;
    }
    col[i] = v;
  }
  return mc_accumulate(col, "NE");
}

EfficiencyTable efficiency_report(const std::vector<CdfCurve>& curves) {
  EfficiencyTable t;
  if (curves.empty()) return t;
  t.grid = curves[0].grid;
  for (const auto& c : curves) {
    if (c.grid != t.grid || c.points.size() != t.grid.size()) throw ConfigError("curves do not share a grid");
    t.methods.push_back(c.method);
  }
  const std::size_t m = curves.size();
  t.eff.assign(t.grid.size(), std::vector<std::vector<double>>(m, std::vector<double>(m)));
  for (std::size_t g = 0; g < t.grid.size(); ++g) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const auto& pa = curves[a].points[g];
        const auto& pb = curves[b].points[g];
        t.eff[g][a][b] = (pa.var == 0.0 && pb.var == 0.0) ? std::numeric_limits<double>::quiet_NaN()
                                                          : relative_efficiency(pa, pb);
      }
    }
  }
  return t;
}

}  // namespace lrq
