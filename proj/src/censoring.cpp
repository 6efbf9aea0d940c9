#include "lrq/censoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>

#include "lrq/error.hpp"
#include "lrq/parallel.hpp"
#include "lrq/stats.hpp"

namespace lrq {

CensorSchedule::CensorSchedule(std::vector<double> breakpoints, std::vector<MarkMask> observed)
    : breakpoints_(std::move(breakpoints)), observed_(std::move(observed)) {
  if (breakpoints_.size() < 2 || observed_.size() + 1 != breakpoints_.size())
    throw ConfigError("censor schedule needs n+1 breakpoints for n observed sets");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!std::isfinite(breakpoints_[i])) throw ConfigError("censor breakpoints must be finite");
    if (i > 0 && breakpoints_[i] <= breakpoints_[i - 1]) throw ConfigError("censor breakpoints must increase");
  }
  for (const auto& m : observed_)
    if (m.size() != observed_.front().size()) throw ConfigError("observed sets differ in size");
}

CensorSchedule CensorSchedule::all_observed(int num_marks, double start, double end) {
  return CensorSchedule({start, end}, {full_mask(num_marks)});
}

CensorSchedule CensorSchedule::censor(int num_marks, const MarkMask& censored, double start, double end) {
  if (static_cast<int>(censored.size()) != num_marks) throw ConfigError("censored mask size mismatch");
  MarkMask obs(censored.size());
  for (std::size_t k = 0; k < obs.size(); ++k) obs[k] = !censored[k];
  return CensorSchedule({start, end}, {obs});
}

const MarkMask& CensorSchedule::observed_at(double t) const {
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  std::size_t idx = it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  return observed_[std::min(idx, observed_.size() - 1)];
}

void CensorSchedule::validate(int num_marks) const {
  if (static_cast<int>(observed_.front().size()) != num_marks)
    throw ConfigError("censor schedule mark count mismatch");
}

void CensorSchedule::check_sequence(const EventSequence& seq) const {
  validate(static_cast<int>(observed_.front().size()));
  for (const auto& e : seq.events) {
    if (e.time < start()) throw ConfigError("observed event precedes the censoring window");
    if (!observed_at(e.time)[e.mark])
      throw ConfigError("observed event at t=" + std::to_string(e.time) + " carries a censored mark");
  }
}

namespace {

// Base intensity with marks observed at t zeroed: the censoring proposal.
class CensoringTracker final : public IntensityTracker {
 public:
  CensoringTracker(std::unique_ptr<IntensityTracker> base, const CensorSchedule* schedule)
      : base_(std::move(base)), schedule_(schedule) {}
  CensoringTracker(const CensoringTracker& o) : IntensityTracker(o), base_(o.base_->clone()), schedule_(o.schedule_) {}

  std::unique_ptr<IntensityTracker> clone() const override { return std::make_unique<CensoringTracker>(*this); }
  int num_marks() const override { return base_->num_marks(); }

  void intensity(double t, std::span<double> out) const override {
    base_->intensity(t, out);
    const MarkMask& obs = schedule_->observed_at(t);
    for (std::size_t k = 0; k < obs.size(); ++k)
      if (obs[k]) out[k] = 0.0;
  }

  void push(const Event& e) override {
    base_->push(e);
    last_time_ = e.time;
  }

  double dominating_rate(double t0, double t1) const override {
    const auto& b = schedule_->breakpoints();
    bool any_censored = false;
    for (std::size_t i = 0; i < schedule_->observed().size() && !any_censored; ++i) {
      const double lo = b[i];
      const double hi = i + 2 == b.size() ? kInf : b[i + 1];
      if (hi <= t0 || lo >= t1) continue;
      any_censored = !std::all_of(schedule_->observed()[i].begin(), schedule_->observed()[i].end(),
                                  [](char c) { return c != 0; });
    }
    return any_censored ? base_->dominating_rate(t0, t1) : 0.0;
  }

 private:
  std::unique_ptr<IntensityTracker> base_;
  const CensorSchedule* schedule_;
};

double observed_integral(const IntensityTracker& tr, const CensorSchedule& schedule, double t0, double t1) {
  if (t1 <= t0) return 0.0;
  double total = 0.0, lo = t0;
  for (double b : schedule.breakpoints()) {
    if (b <= lo) continue;
    if (b >= t1) break;
    total += tr.integral(lo, b, schedule.observed_at(0.5 * (lo + b)));
    lo = b;
  }
  return total + tr.integral(lo, t1, schedule.observed_at(0.5 * (lo + t1)));
}

}  // namespace

CensoredSampleBank::CensoredSampleBank(const MtppModel& model, const CensorSchedule& schedule,
                                       const EventSequence& observed, std::vector<double> times,
                                       std::vector<char> after_event, std::size_t samples, RngStream rng,
                                       const CensorOptions& options)
    : samples_(samples), marks_(model.num_marks()), times_(std::move(times)), after_event_(std::move(after_event)) {
  if (samples_ < 1) throw ConfigError("need at least one censoring sample");
  if (after_event_.empty()) after_event_.assign(times_.size(), 0);
  if (after_event_.size() != times_.size()) throw ConfigError("node flags size mismatch");
  schedule.validate(marks_);
  observed.validate(marks_);
  schedule.check_sequence(observed);
  for (std::size_t j = 0; j < times_.size(); ++j) {
    if (times_[j] < schedule.start()) throw ConfigError("grid time precedes the censoring window");
    if (j > 0 && std::tie(times_[j], after_event_[j]) < std::tie(times_[j - 1], after_event_[j - 1]))
      throw ConfigError("grid times must be nondecreasing");
  }
  const std::size_t N = times_.size();
  const auto K = static_cast<std::size_t>(marks_);
  log_weight_.assign(samples_ * N, 0.0);
  intensity_.assign(samples_ * N * K, 0.0);

  parallel_for(samples_, options.workers, [&](std::size_t i) {
    RngStream r = rng.substream(i);
    CensoringTracker prop(model.tracker(), &schedule);
    auto base = model.tracker();
    std::vector<Event> drawn;
    std::vector<double> lam(K);
    double t = schedule.start(), log_w = 0.0;

    auto advance = [&](double target) {
      if (target <= t) return;
      drawn.clear();
      thinning_extend(prop, t, target, r, drawn, options.thinning);
      for (const auto& e : drawn) {
        if (schedule.observed_at(e.time)[e.mark]) throw NumericError("censoring proposal produced an observed mark");
        log_w -= observed_integral(*base, schedule, t, e.time);
        base->push(e);
        t = e.time;
      }
      log_w -= observed_integral(*base, schedule, t, target);
      t = target;
    };

    std::size_t e = 0, j = 0;
    const auto& ev = observed.events;
    while (j < N) {
      const bool node_first =
          e == ev.size() || times_[j] < ev[e].time || (times_[j] == ev[e].time && !after_event_[j]);
      if (node_first) {
        advance(times_[j]);
        base->intensity(times_[j], lam);
        log_weight_[i * N + j] = log_w;
        std::copy(lam.begin(), lam.end(), intensity_.begin() + static_cast<std::ptrdiff_t>((i * N + j) * K));
        ++j;
      } else {
        advance(ev[e].time);
        if (options.weight_observed_events) {
          base->intensity(ev[e].time, lam);
          log_w += lam[ev[e].mark] > 0.0 ? std::log(lam[ev[e].mark]) : -kInf;
        }
        base->push(ev[e]);
        prop.push(ev[e]);
        ++e;
      }
    }
  });
}

CensoredCurves censored_curves(const CensoredSampleBank& numerator, const CensoredSampleBank& denominator,
                               const CensorSchedule&) {
  if (numerator.times() != denominator.times() || numerator.after_event() != denominator.after_event())
    throw ConfigError("sample banks use different grids");
  const std::size_t N = numerator.nodes();
  const int K = numerator.num_marks();
  CensoredCurves out;
  out.times = numerator.times();
  out.intensity.assign(N, std::vector<double>(static_cast<std::size_t>(K), 0.0));
  out.se = out.intensity;
  out.ess.assign(N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    double den_max = -kInf, num_max = -kInf;
    for (std::size_t i = 0; i < denominator.samples(); ++i) den_max = std::max(den_max, denominator.log_weight(i, j));
    for (std::size_t i = 0; i < numerator.samples(); ++i) num_max = std::max(num_max, numerator.log_weight(i, j));
    if (!std::isfinite(den_max) || !std::isfinite(num_max))
      throw NumericError("all importance weights vanished (max log weight " +
                         std::to_string(std::min(den_max, num_max)) + " at t=" + std::to_string(out.times[j]) + ")");
    if (num_max - den_max > 700.0) throw NumericError("numerator and denominator weights differ in scale");
    const bool shared = &numerator == &denominator;
    std::vector<double> g(denominator.samples()), fg(numerator.samples()), wn(numerator.samples());
    double den = 0.0, den_sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = std::exp(denominator.log_weight(i, j) - den_max);
      den += g[i];
      den_sq += g[i] * g[i];
    }
    out.ess[j] = den * den / den_sq;
    for (std::size_t i = 0; i < wn.size(); ++i) wn[i] = std::exp(numerator.log_weight(i, j) - den_max);
    const double mean_g = den / static_cast<double>(g.size());
    for (int k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = wn[i] * numerator.intensity(i, j, k);
      const auto kk = static_cast<std::size_t>(k);
      if (fg.size() < 2 || g.size() < 2) {
        out.intensity[j][kk] = std::accumulate(fg.begin(), fg.end(), 0.0) / static_cast<double>(fg.size()) / mean_g;
        continue;
      }
      const RatioDiagnostics d = ratio_bias_variance(fg, g, shared);
      out.intensity[j][kk] = d.ratio;
      out.se[j][kk] = std::sqrt(std::max(d.variance, 0.0));
    }
  }
  return out;
}

namespace {

struct Banks {
  CensoredSampleBank numerator;
  std::optional<CensoredSampleBank> denominator;
  const CensoredSampleBank& den() const { return denominator ? *denominator : numerator; }
};

Banks build_banks(const MtppModel& model, const CensorSchedule& schedule, const EventSequence& observed,
                  const std::vector<double>& times, const std::vector<char>& after, RngStream rng,
                  const CensorOptions& o) {
  if (o.reuse) return {CensoredSampleBank(model, schedule, observed, times, after, o.samples, rng, o), std::nullopt};
  return {CensoredSampleBank(model, schedule, observed, times, after, o.samples, rng.substream(0), o),
          CensoredSampleBank(model, schedule, observed, times, after, o.samples, rng.substream(1), o)};
}

}  // namespace

CensoredCurves censored_intensity(const MtppModel& model, const CensorSchedule& schedule,
                                  const EventSequence& observed, const std::vector<double>& grid, RngStream rng,
                                  const CensorOptions& options) {
  if (grid.empty()) throw ConfigError("time grid is empty");
  const Banks banks = build_banks(model, schedule, observed, grid, {}, rng, options);
  CensoredCurves out = censored_curves(banks.numerator, banks.den(), schedule);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const MarkMask& obs = schedule.observed_at(grid[j]);
    for (std::size_t k = 0; k < obs.size(); ++k)
      if (!obs[k]) out.intensity[j][k] = out.se[j][k] = 0.0;
  }
  return out;
}

double censored_log_likelihood(const MtppModel& model, const CensorSchedule& schedule,
                               const EventSequence& observed, double tau, RngStream rng,
                               const CensorOptions& options) {
  if (options.points < 2) throw ConfigError("need at least two integration points");
  if (!(tau > schedule.start())) throw ConfigError("horizon must follow the window start");
  std::vector<std::pair<double, char>> nodes;
  const double start = schedule.start();
  for (int p = 0; p < options.points; ++p)
    nodes.emplace_back(p + 1 == options.points ? tau : start + (tau - start) * p / (options.points - 1), 0);
  for (double b : schedule.breakpoints())
    if (b > start && b < tau) nodes.emplace_back(b, 0);
  for (const auto& e : observed.events)
    if (e.time <= tau) {
      nodes.emplace_back(e.time, 0);
      nodes.emplace_back(e.time, 1);
    }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<double> times;
  std::vector<char> after;
  for (const auto& [t, a] : nodes) {
    times.push_back(t);
    after.push_back(a);
  }
  EventSequence window;
  for (const auto& e : observed.events)
    if (e.time <= tau) window.events.push_back(e);
  window.window_end = tau;

  const Banks banks = build_banks(model, schedule, window, times, after, rng, options);
  const CensoredCurves curves = censored_curves(banks.numerator, banks.den(), schedule);

  double ll = 0.0;
  std::size_t e = 0;
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    if (!after[j] && e < window.events.size() && window.events[e].time == times[j]) {
      const double v = curves.intensity[j][static_cast<std::size_t>(window.events[e].mark)];
      ll += v > 0.0 ? std::log(v) : -kInf;
      ++e;
    }
    const MarkMask& obs = schedule.observed_at(0.5 * (times[j] + times[j + 1]));
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k)
      if (obs[k]) {
        lo += curves.intensity[j][k];
        hi += curves.intensity[j + 1][k];
      }
    ll -= 0.5 * (times[j + 1] - times[j]) * (lo + hi);
  }
  return ll;
}

double baseline_log_likelihood(const MtppModel& model, const CensorSchedule& schedule,
                               const EventSequence& observed, double tau) {
  schedule.validate(model.num_marks());
  observed.validate(model.num_marks());
  schedule.check_sequence(observed);
  auto tr = model.tracker();
  std::vector<double> lam(static_cast<std::size_t>(model.num_marks()));
  double ll = 0.0, t = schedule.start();
  for (const auto& e : observed.events) {
    if (e.time > tau) break;
    ll -= observed_integral(*tr, schedule, t, e.time);
    tr->intensity(e.time, lam);
    ll += lam[e.mark] > 0.0 ? std::log(lam[e.mark]) : -kInf;
    tr->push(e);
    t = e.time;
  }
  return ll - observed_integral(*tr, schedule, t, tau);
}

CensoredLikelihood censored_likelihood_pair(const MtppModel& model, const CensorSchedule& schedule,
                                            const EventSequence& observed, double tau, RngStream rng,
                                            const CensorOptions& options) {
  CensoredLikelihood out;
  out.censored = censored_log_likelihood(model, schedule, observed, tau, rng, options);
  out.baseline = baseline_log_likelihood(model, schedule, observed, tau);
  out.log_ratio = out.censored - out.baseline;
  return out;
}

RatioDiagnostics ratio_bias_variance(const std::vector<double>& fg, const std::vector<double>& g, bool shared) {
  if (fg.size() < 2 || g.size() < 2) throw ConfigError("need at least two samples of each term");
  if (shared && fg.size() != g.size()) throw ConfigError("shared samples must be paired");
  const EstimateSummary sf = mc_accumulate(fg), sg = mc_accumulate(g);
  if (!(sg.mean > 0.0)) throw NumericError("mean of the denominator samples must be positive");
  const double mf = sf.mean, mg = sg.mean, vf = sf.var, vg = sg.var;
  const auto M = static_cast<double>(fg.size()), Mg = static_cast<double>(g.size());
  RatioDiagnostics d;
  d.ratio = mf / mg;
  if (shared) {
    double cov = 0.0;
    for (std::size_t i = 0; i < fg.size(); ++i) cov += (fg[i] - mf) * (g[i] - mg);
    cov /= M - 1.0;
    d.bias = -cov / (M * mg * mg) + vg * mf / (M * mg * mg * mg);
    d.variance = vf / (M * mg * mg) - 2.0 * mf * cov / (M * mg * mg * mg) + vg * mf * mf / (M * std::pow(mg, 4));
  } else {
    d.bias = vg * mf / (Mg * mg * mg * mg);
    d.variance = vf / (M * mg * mg) + vg * mf * mf / (Mg * std::pow(mg, 4));
  }
  d.corrected = d.ratio - d.bias;
  return d;
}

}  // namespace lrq
