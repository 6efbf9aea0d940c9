#include "lrq/mtpp_query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrq/error.hpp"
#include "lrq/parallel.hpp"

namespace lrq {

MarkSchedule::MarkSchedule(std::vector<double> boundaries, std::vector<MarkMask> forbidden)
    : boundaries_(std::move(boundaries)), forbidden_(std::move(forbidden)) {
  if (boundaries_.size() < 2 || forbidden_.size() + 1 != boundaries_.size())
    throw ConfigError("schedule needs n+1 boundaries for n forbidden sets");
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    if (std::isnan(boundaries_[i]) || boundaries_[i] < 0.0) throw ConfigError("schedule boundaries must be >= 0");
    if (i > 0 && boundaries_[i] <= boundaries_[i - 1]) throw ConfigError("schedule boundaries must increase");
  }
}

MarkSchedule MarkSchedule::single(double start, double end, MarkMask marks) {
  return MarkSchedule({start, end}, {std::move(marks)});
}

const MarkMask* MarkSchedule::forbidden_at(double t) const {
  const auto idx = static_cast<std::size_t>(std::lower_bound(boundaries_.begin(), boundaries_.end(), t) -
                                            boundaries_.begin());
  if (idx == 0 || idx >= boundaries_.size()) return nullptr;
  return &forbidden_[idx - 1];
}

void MarkSchedule::validate(int num_marks) const {
  for (const auto& m : forbidden_)
    if (static_cast<int>(m.size()) != num_marks) throw ConfigError("schedule mark mask size mismatch");
}

namespace {

bool all_set(const MarkMask& m) {
  return std::all_of(m.begin(), m.end(), [](char c) { return c != 0; });
}

MarkMask minus(const MarkMask& a, const MarkMask& b) {
  MarkMask out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] && !b[k];
  return out;
}

MarkMask unite(const MarkMask& a, const MarkMask& b) {
  MarkMask out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] || b[k];
  return out;
}

MarkMask complement(const MarkMask& a) {
  MarkMask out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = !a[k];
  return out;
}

class RestrictedTracker final : public IntensityTracker {
 public:
  RestrictedTracker(std::unique_ptr<IntensityTracker> base, const MarkSchedule* schedule)
      : base_(std::move(base)), schedule_(schedule) {
    last_time_ = base_->last_event_time();
  }
  RestrictedTracker(const RestrictedTracker& o) : IntensityTracker(o), base_(o.base_->clone()), schedule_(o.schedule_) {}

  std::unique_ptr<IntensityTracker> clone() const override { return std::make_unique<RestrictedTracker>(*this); }
  int num_marks() const override { return base_->num_marks(); }

  void intensity(double t, std::span<double> out) const override {
    base_->intensity(t, out);
    if (const MarkMask* f = schedule_->forbidden_at(t))
      for (std::size_t k = 0; k < f->size(); ++k)
        if ((*f)[k]) out[k] = 0.0;
  }

  void push(const Event& e) override {
    if (const MarkMask* f = schedule_->forbidden_at(e.time); f && (*f)[e.mark])
      throw NumericError("proposal produced a forbidden mark");
    base_->push(e);
    last_time_ = e.time;
  }

  double dominating_rate(double t0, double t1) const override {
    // Zero when every mark is forbidden throughout (t0, t1].
    const auto& b = schedule_->boundaries();
    if (t0 >= b.front() && t1 <= b.back()) {
      bool blocked = true;
      for (std::size_t i = 0; i + 1 < b.size() && blocked; ++i)
        if (b[i + 1] > t0 && b[i] < t1) blocked = all_set(schedule_->forbidden()[i]);
      if (blocked) return 0.0;
    }
    return base_->dominating_rate(t0, t1);
  }

  double integral(double t0, double t1, const MarkMask& mask, int points) const override {
    double total = 0.0;
    std::vector<double> cuts{t0};
    for (double b : schedule_->boundaries())
      if (b > t0 && b < t1) cuts.push_back(b);
    cuts.push_back(t1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const MarkMask* f = schedule_->forbidden_at(0.5 * (cuts[i] + cuts[i + 1]));
      total += base_->integral(cuts[i], cuts[i + 1], f ? minus(mask, *f) : mask, points);
    }
    return total;
  }

 private:
  std::unique_ptr<IntensityTracker> base_;
  const MarkSchedule* schedule_;
};

void check_history(const MtppModel& model, const MtppEstimateOptions& o) { o.history.validate(model.num_marks()); }

void check_mask(const MtppModel& model, const MarkMask& m, const char* what) {
  if (static_cast<int>(m.size()) != model.num_marks())
    throw ConfigError(std::string(what) + " mark mask size mismatch");
}

bool any_set(const MarkMask& m) {
  return std::any_of(m.begin(), m.end(), [](char c) { return c != 0; });
}

void check_unit_interval(double v) {
  if (!(v >= 0.0 && v <= 1.0 + 1e-12)) throw NumericError("importance sample outside [0, 1]: " + std::to_string(v));
}

}  // namespace

RestrictedProposal::RestrictedProposal(const MtppModel& base, MarkSchedule schedule)
    : base_(&base), schedule_(std::move(schedule)) {
  schedule_.validate(base.num_marks());
}

std::unique_ptr<IntensityTracker> RestrictedProposal::tracker() const {
  return std::make_unique<RestrictedTracker>(base_->tracker(), &schedule_);
}

void check_bounded_variance(const EstimateSummary& s, double slack) {
  if (s.n < 2) return;
  const double bound = s.mean * (1.0 - s.mean) * static_cast<double>(s.n) / static_cast<double>(s.n - 1);
  if (s.var > bound + slack) throw NumericError("bounded estimator variance exceeds the Bernoulli bound");
}

EstimateSummary restricted_mark_is_estimate(const MtppModel& model, const MarkSchedule& schedule, std::size_t n,
                                            RngStream rng, const MtppEstimateOptions& options) {
  if (n < 1) throw ConfigError("need at least one sample");
  check_history(model, options);
  schedule.validate(model.num_marks());
  if (schedule.start() < options.history.window_end) throw ConfigError("schedule starts before the history ends");
  const RestrictedProposal proposal(model, schedule);
  auto sample = [&](std::size_t i) {
    RngStream r = rng.substream(i);
    auto prop = proposal.tracker(options.history);
    auto base = model.tracker(options.history);
    std::vector<Event> events;
    thinning_extend(*prop, options.history.window_end, schedule.end(), r, events, options.thinning);
    // Walk panels between events and schedule boundaries with the base intensity.
    double exponent = 0.0, t = options.history.window_end;
    std::size_t next_event = 0;
    auto advance_to = [&](double target) {
      const auto& b = schedule.boundaries();
      std::vector<double> cuts{t};
      for (double x : b)
        if (x > t && x < target) cuts.push_back(x);
      cuts.push_back(target);
      for (std::size_t c = 0; c + 1 < cuts.size(); ++c)
        if (const MarkMask* f = schedule.forbidden_at(0.5 * (cuts[c] + cuts[c + 1])))
          exponent += base->integral(cuts[c], cuts[c + 1], *f, options.points);
      t = target;
    };
    while (next_event < events.size()) {
      advance_to(events[next_event].time);
      base->push(events[next_event++]);
    }
    advance_to(schedule.end());
    const double v = std::exp(-exponent);
    check_unit_interval(v);
    return v;
  };
  auto s = sample_mean(n, options.workers, sample, "IS");
  check_bounded_variance(s);
  return s;
}

EstimateSummary naive_query_estimate(const MtppModel& model, const SequencePredicate& predicate, double tau,
                                     std::size_t n, RngStream rng, const MtppEstimateOptions& options) {
  if (n < 1) throw ConfigError("need at least one sample");
  check_history(model, options);
  if (tau < options.history.window_end) throw ConfigError("horizon precedes the end of history");
  auto sample = [&](std::size_t i) {
    RngStream r = rng.substream(i);
    auto seq = thinning_sample(model, options.history.window_end, tau, options.history, r, options.thinning);
    return predicate(seq) ? 1.0 : 0.0;
  };
  return sample_mean(n, options.workers, sample, "naive");
}

namespace {

std::vector<EstimateSummary> accumulate_columns(const std::vector<std::vector<double>>& rows, std::size_t cols,
                                                const std::string& method) {
  std::vector<EstimateSummary> out;
  std::vector<double> column(rows.size());
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][c];
    out.push_back(mc_accumulate(column, method));
  }
  return out;
}

void check_times(const std::vector<double>& times, double start) {
  if (times.empty()) throw ConfigError("time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= start)) throw ConfigError("grid time precedes the end of history");
    if (i > 0 && times[i] < times[i - 1]) throw ConfigError("grid times must be nondecreasing");
  }
}

}  // namespace

std::vector<EstimateSummary> hitting_time_cdf_estimate(const MtppModel& model, const MarkMask& a,
                                                       const std::vector<double>& times, std::size_t n, RngStream rng,
                                                       const MtppEstimateOptions& options) {
  if (n < 1) throw ConfigError("need at least one sample");
  check_history(model, options);
  check_mask(model, a, "target");
  if (!any_set(a)) throw ConfigError("target mark set is empty");
  const double start = options.history.window_end;
  check_times(times, start);
  const double t_max = times.back();
  if (t_max <= start) {
    std::vector<EstimateSummary> zeros;
    for (std::size_t j = 0; j < times.size(); ++j) zeros.push_back(make_summary(n, 0.0, 0.0, "IS"));
    return zeros;
  }
  const RestrictedProposal proposal(model, MarkSchedule::single(start, t_max, a));
  auto rows = parallel_map<std::vector<double>>(n, options.workers, [&](std::size_t i) {
    RngStream r = rng.substream(i);
    auto prop = proposal.tracker(options.history);
    auto base = model.tracker(options.history);
    std::vector<Event> events;
    thinning_extend(*prop, start, t_max, r, events, options.thinning);
    std::vector<double> values(times.size());
    double t = start, exponent = 0.0;
    std::size_t e = 0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      while (e < events.size() && events[e].time <= times[j]) {
        exponent += base->integral(t, events[e].time, a, options.points);
        base->push(events[e]);
        t = events[e++].time;
      }
      exponent += base->integral(t, times[j], a, options.points);
      t = times[j];
      values[j] = -std::expm1(-exponent);
      check_unit_interval(values[j]);
    }
    return values;
  });
  auto out = accumulate_columns(rows, times.size(), "IS");
  for (const auto& s : out) check_bounded_variance(s);
  return out;
}

std::vector<EstimateSummary> naive_hitting_cdf(const MtppModel& model, const MarkMask& a,
                                               const std::vector<double>& times, std::size_t n, RngStream rng,
                                               const MtppEstimateOptions& options) {
  if (n < 1) throw ConfigError("need at least one sample");
  check_history(model, options);
  check_mask(model, a, "target");
  const double start = options.history.window_end;
  check_times(times, start);
  auto rows = parallel_map<std::vector<double>>(n, options.workers, [&](std::size_t i) {
    RngStream r = rng.substream(i);
    auto tr = model.tracker(options.history);
    std::vector<Event> events;
    thinning_extend(*tr, start, times.back(), r, events, options.thinning);
    double hit = kInf;
    for (const auto& e : events)
      if (a[e.mark]) {
        hit = e.time;
        break;
      }
    std::vector<double> values(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) values[j] = hit <= times[j] ? 1.0 : 0.0;
    return values;
  });
  return accumulate_columns(rows, times.size(), "naive");
}

namespace {

// Advances tracker by `count` unrestricted events, extending the window by
// doubling chunks. Returns the time of the last event drawn.
double draw_events(IntensityTracker& tr, double start, int count, RngStream& r, const NthMarkOptions& o) {
  double t = start, len = o.horizon;
  std::vector<Event> events;
  for (int ext = 0; count > 0; ++ext) {
    if (ext > o.max_extensions) throw NumericError("event index not reached within the extension limit");
    events.clear();
    const double reached = thinning_extend(tr, t, t + len, r, events, o.thinning, static_cast<std::size_t>(count));
    count -= static_cast<int>(events.size());
    t = reached;
    len *= 2.0;
  }
  return t;
}

// exp(-integral of lambda_forbid) from `start` to the next event of the
// proposal that forbids `forbid`; 0 once the exponent underflows.
double survive_until_next(const IntensityTracker& base, double start, const MarkMask& forbid, RngStream& r,
                          const NthMarkOptions& o) {
  MarkSchedule sched = MarkSchedule::single(start, std::numeric_limits<double>::max(), forbid);
  RestrictedTracker prop(base.clone(), &sched);
  double t = start, len = o.horizon, exponent = 0.0;
  std::vector<Event> events;
  for (int ext = 0;; ++ext) {
    if (ext > o.max_extensions) throw NumericError("event index not reached within the extension limit");
    events.clear();
    const double reached = thinning_extend(prop, t, t + len, r, events, o.thinning, 1);
    exponent += base.integral(t, reached, forbid, o.points);
    if (!events.empty() || exponent > 745.0) break;
    t = reached;
    len *= 2.0;
  }
  return std::exp(-exponent);
}

}  // namespace

EstimateSummary nth_mark_estimate(const MtppModel& model, const MarkMask& a, int index, std::size_t n, RngStream rng,
                                  const NthMarkOptions& options) {
  if (n < 1) throw ConfigError("need at least one sample");
  if (index < 1) throw ConfigError("event index must be >= 1");
  if (!(options.horizon > 0.0)) throw ConfigError("horizon must be positive");
  check_history(model, options);
  check_mask(model, a, "target");
  if (!any_set(a)) throw ConfigError("target mark set is empty");
  const MarkMask rest = complement(a);
  const int steps = options.points > 1 ? options.points : 1000;
  auto sample = [&](std::size_t i) {
    RngStream r = rng.substream(i);
    auto tr = model.tracker(options.history);
    const double prev = draw_events(*tr, options.history.window_end, index - 1, r, options);
    double v = 0.0;
    switch (options.form) {
      case NthMarkForm::direct:
        v = any_set(rest) ? survive_until_next(*tr, prev, rest, r, options) : 1.0;
        break;
      case NthMarkForm::complement:
        v = 1.0 - survive_until_next(*tr, prev, a, r, options);
        break;
      case NthMarkForm::conditional:
        v = next_mark_prob(*tr, prev, a, prev, kInf, steps);
        break;
    }
    v = std::clamp(v, 0.0, 1.0);
    return v;
  };
  static const char* tags[] = {"IS", "IS_complement", "IS_conditional"};
  auto s = sample_mean(n, options.workers, sample, tags[static_cast<int>(options.form)]);
  check_bounded_variance(s, 1e-9);
  return s;
}

BeforeResult a_before_b_estimate(const MtppModel& model, const MarkMask& a, const MarkMask& b, std::size_t n,
                                 RngStream rng, const BeforeOptions& o) {
  if (n < 1) throw ConfigError("need at least one sample");
  check_history(model, o);
  check_mask(model, a, "A");
  check_mask(model, b, "B");
  if (!any_set(a) || !any_set(b)) throw ConfigError("A and B must be nonempty");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] && b[k]) throw ConfigError("A and B must be disjoint");
  if (!(o.epsilon > 0.0) && !(o.tau > 0.0)) throw ConfigError("need epsilon > 0 or a fixed horizon");
  if (!(o.step > 0.0)) throw ConfigError("integration step must be positive");
  const MarkMask ab = unite(a, b);
  const double start = o.history.window_end;
  const double stop = o.tau > 0.0 ? start + o.tau : start + o.tau_cap;
  const RestrictedProposal proposal(model, MarkSchedule::single(start, stop, ab));

  struct Bounds {
    double lower, gap;
    bool capped;
  };
  auto rows = parallel_map<Bounds>(n, o.workers, [&](std::size_t i) {
    RngStream r = rng.substream(i);
    auto prop = proposal.tracker(o.history);
    auto base = model.tracker(o.history);
    double t = start, len = 1.0, la = 0.0, cumulative = 0.0;
    std::vector<Event> events;
    auto panel = [&](double t0, double t1) {
      const auto steps = static_cast<int>(std::min(1e6, std::ceil((t1 - t0) / o.step)));
      la += survival_weighted_integral(*base, t0, t1, a, ab, cumulative, steps);
    };
    auto done = [&] { return o.tau <= 0.0 && std::exp(-cumulative) <= o.epsilon; };
    while (t < stop && !done()) {
      const double chunk_end = std::min(stop, t + len);
      events.clear();
      thinning_extend(*prop, t, chunk_end, r, events, o.thinning);
      for (const auto& e : events) {
        panel(t, e.time);
        base->push(e);
        t = e.time;
        if (done()) break;
      }
      if (!done()) {
        panel(t, chunk_end);
        t = chunk_end;
      }
      len *= 2.0;
    }
    if (la > 1.0 + 1e-9) throw NumericError("A-before-B integrand exceeded 1");
    return Bounds{std::min(la, 1.0), std::exp(-cumulative), o.tau <= 0.0 && !done()};
  });

  std::vector<double> lower(n), upper(n), mid(n);
  BeforeResult out;
  for (std::size_t i = 0; i < n; ++i) {
    lower[i] = rows[i].lower;
    upper[i] = std::min(1.0, rows[i].lower + rows[i].gap);
    mid[i] = 0.5 * (lower[i] + upper[i]);
    out.max_gap = std::max(out.max_gap, rows[i].gap);
    out.capped += rows[i].capped;
  }
  out.estimate = mc_accumulate(mid, "IS_midpoint");
  out.lower = mc_accumulate(lower, "IS_lower");
  out.upper = mc_accumulate(upper, "IS_upper");
  out.estimate.extra["biased"] = 1.0;
  out.estimate.extra["max_gap"] = out.max_gap;
  out.estimate.extra["capped"] = static_cast<double>(out.capped);
  return out;
}

}  // namespace lrq
