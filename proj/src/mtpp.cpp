#include "lrq/mtpp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lrq/error.hpp"
#include "lrq/integrate.hpp"
#include "lrq/stats.hpp"

namespace lrq {

EventSequence::EventSequence(std::vector<Event> ev, double end) : events(std::move(ev)) {
  window_end = end < 0.0 ? last_time() : end;
}

void EventSequence::validate(int num_marks) const {
  double prev = -1.0;
  for (const auto& e : events) {
    if (!std::isfinite(e.time) || e.time < 0.0) throw ConfigError("event times must be finite and >= 0");
    if (e.time <= prev) throw ConfigError("event times must be strictly increasing");
    if (e.mark < 0 || e.mark >= num_marks) throw ConfigError("event mark " + std::to_string(e.mark) + " out of range");
    prev = e.time;
  }
  if (!events.empty() && events.back().time > window_end) throw ConfigError("event after window end");
}

MarkMask mark_mask(int num_marks, std::span<const Mark> marks) {
  MarkMask m(static_cast<std::size_t>(num_marks), 0);
  for (Mark k : marks) {
    if (k < 0 || k >= num_marks) throw ConfigError("mark " + std::to_string(k) + " out of range");
    m[k] = 1;
  }
  return m;
}

MarkMask full_mask(int num_marks) { return MarkMask(static_cast<std::size_t>(num_marks), 1); }

double IntensityTracker::integral(double t0, double t1, const MarkMask& mask, int points) const {
  return trapezoid_integral(t0, t1, mask, points > 1 ? points : 1000);
}

double IntensityTracker::trapezoid_integral(double t0, double t1, const MarkMask& mask, int points) const {
  if (t1 <= t0) return 0.0;
  std::vector<double> lam(static_cast<std::size_t>(num_marks()));
  std::vector<double> values(static_cast<std::size_t>(points));
  const Grid grid = Grid::uniform(t0, t1, points);
  for (int i = 0; i < points; ++i) {
    intensity(grid[i], lam);
    double s = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k)
      if (mask[k]) s += lam[k];
    values[i] = s;
  }
  return trapezoid(values, grid);
}

std::unique_ptr<IntensityTracker> MtppModel::tracker(const EventSequence& history) const {
  auto tr = tracker();
  for (const auto& e : history.events) tr->push(e);
  return tr;
}

namespace {

void check_causal(double t, double last) {
  if (t < last) throw ConfigError("non-causal evaluation");
}

void check_square(const std::vector<std::vector<double>>& m, std::size_t k, const char* name) {
  if (m.size() != k) throw ConfigError(std::string(name) + " must be K x K");
  for (const auto& row : m)
    if (row.size() != k) throw ConfigError(std::string(name) + " must be K x K");
}

// Excitation state: decay[i][k] = sum over events of mark i of
// exp(-beta[i][k] (ref - T)), with ref the last event time.
class HawkesTracker final : public IntensityTracker {
 public:
  explicit HawkesTracker(const HawkesExp& m)
      : model_(&m), state_(m.num_marks(), std::vector<double>(static_cast<std::size_t>(m.num_marks()), 0.0)) {}

  std::unique_ptr<IntensityTracker> clone() const override { return std::make_unique<HawkesTracker>(*this); }
  int num_marks() const override { return model_->num_marks(); }

  void intensity(double t, std::span<double> out) const override {
    check_causal(t, last_time_);
    const auto& mu = model_->mu();
    const auto& a = model_->alpha();
    const auto& b = model_->beta();
    const double dt = t - last_time_;
    const std::size_t K = mu.size();
    for (std::size_t k = 0; k < K; ++k) out[k] = mu[k];
    for (std::size_t i = 0; i < K; ++i) {
      if (!active_[i]) continue;
      for (std::size_t k = 0; k < K; ++k)
        if (a[i][k] != 0.0) out[k] += a[i][k] * state_[i][k] * std::exp(-b[i][k] * dt);
    }
  }

  void push(const Event& e) override {
    check_causal(e.time, last_time_);
    const auto& b = model_->beta();
    const double dt = e.time - last_time_;
    const std::size_t K = state_.size();
    for (std::size_t i = 0; i < K; ++i) {
      if (!active_[i]) continue;
      for (std::size_t k = 0; k < K; ++k) state_[i][k] *= std::exp(-b[i][k] * dt);
    }
    for (std::size_t k = 0; k < K; ++k) state_[e.mark][k] += 1.0;
    active_[e.mark] = 1;
    last_time_ = e.time;
  }

  double dominating_rate(double t0, double) const override {
    // Intensities only decay between events; add the baseline as slack.
    std::vector<double> lam(state_.size());
    intensity(t0, lam);
    const auto& mu = model_->mu();
    return std::accumulate(lam.begin(), lam.end(), 0.0) + std::accumulate(mu.begin(), mu.end(), 0.0);
  }

  double integral(double t0, double t1, const MarkMask& mask, int points) const override {
    if (points > 1) return trapezoid_integral(t0, t1, mask, points);
    check_causal(t0, last_time_);
    if (t1 <= t0) return 0.0;
    const auto& mu = model_->mu();
    const auto& a = model_->alpha();
    const auto& b = model_->beta();
    const std::size_t K = mu.size();
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      if (mask[k]) total += mu[k] * (t1 - t0);
    const double d0 = t0 - last_time_, d1 = t1 - last_time_;
    for (std::size_t i = 0; i < K; ++i) {
      if (!active_[i]) continue;
      for (std::size_t k = 0; k < K; ++k) {
        if (!mask[k] || a[i][k] == 0.0) continue;
        total += a[i][k] * state_[i][k] * (std::exp(-b[i][k] * d0) - std::exp(-b[i][k] * d1)) / b[i][k];
      }
    }
    return total;
  }

 private:
  const HawkesExp* model_;
  std::vector<std::vector<double>> state_;
  std::vector<char> active_ = std::vector<char>(state_.size(), 0);
};

class SelfCorrectingTracker final : public IntensityTracker {
 public:
  explicit SelfCorrectingTracker(const SelfCorrecting& m)
      : model_(&m), inhibition_(static_cast<std::size_t>(m.num_marks()), 0.0) {}

  std::unique_ptr<IntensityTracker> clone() const override { return std::make_unique<SelfCorrectingTracker>(*this); }
  int num_marks() const override { return model_->num_marks(); }

  void intensity(double t, std::span<double> out) const override {
    check_causal(t, last_time_);
    const auto& eta = model_->eta();
    for (std::size_t k = 0; k < eta.size(); ++k) out[k] = std::exp(eta[k] * t - inhibition_[k]);
  }

  void push(const Event& e) override {
    check_causal(e.time, last_time_);
    const auto& d = model_->delta();
    for (std::size_t k = 0; k < inhibition_.size(); ++k) inhibition_[k] += d[e.mark][k];
    last_time_ = e.time;
  }

  double dominating_rate(double, double t1) const override {
    // Intensities grow between events, so the right edge bounds the segment.
    std::vector<double> lam(inhibition_.size());
    intensity(t1, lam);
    return std::accumulate(lam.begin(), lam.end(), 0.0);
  }

  double integral(double t0, double t1, const MarkMask& mask, int points) const override {
    if (points > 1) return trapezoid_integral(t0, t1, mask, points);
    check_causal(t0, last_time_);
    if (t1 <= t0) return 0.0;
    const auto& eta = model_->eta();
    double total = 0.0;
    for (std::size_t k = 0; k < eta.size(); ++k) {
      if (!mask[k]) continue;
      total += std::exp(-inhibition_[k]) * (std::exp(eta[k] * t1) - std::exp(eta[k] * t0)) / eta[k];
    }
    return total;
  }

 private:
  const SelfCorrecting* model_;
  std::vector<double> inhibition_;
};

class PoissonTracker final : public IntensityTracker {
 public:
  explicit PoissonTracker(const PoissonMtpp& m) : model_(&m) {}
  std::unique_ptr<IntensityTracker> clone() const override { return std::make_unique<PoissonTracker>(*this); }
  int num_marks() const override { return model_->num_marks(); }

  void intensity(double t, std::span<double> out) const override {
    check_causal(t, last_time_);
    model_->rate(t, out);
  }

  void push(const Event& e) override {
    check_causal(e.time, last_time_);
    last_time_ = e.time;
  }

  double dominating_rate(double t0, double t1) const override {
    // Piecewise linear rates peak at an endpoint or a knot.
    std::vector<double> lam(static_cast<std::size_t>(model_->num_marks()));
    auto total_at = [&](double t) {
      model_->rate(t, lam);
      return std::accumulate(lam.begin(), lam.end(), 0.0);
    };
    double c = std::max(total_at(t0), total_at(t1));
    for (double knot : model_->times())
      if (knot > t0 && knot < t1) c = std::max(c, total_at(knot));
    return c;
  }

  double integral(double t0, double t1, const MarkMask& mask, int points) const override {
    if (points > 1) return trapezoid_integral(t0, t1, mask, points);
    if (t1 <= t0) return 0.0;
    double total = 0.0;
    for (int k = 0; k < model_->num_marks(); ++k)
      if (mask[k]) total += model_->rate_integral(k, t0, t1);
    return total;
  }

 private:
  const PoissonMtpp* model_;
};

}  // namespace

HawkesExp::HawkesExp(std::vector<double> mu, std::vector<std::vector<double>> alpha,
                     std::vector<std::vector<double>> beta)
    : mu_(std::move(mu)), alpha_(std::move(alpha)), beta_(std::move(beta)) {
  const std::size_t K = mu_.size();
  if (K < 1) throw ConfigError("Hawkes model needs at least one mark");
  check_square(alpha_, K, "alpha");
  check_square(beta_, K, "beta");
  for (std::size_t i = 0; i < K; ++i) {
    if (!(mu_[i] >= 0.0) || !std::isfinite(mu_[i])) throw ConfigError("mu must be finite and >= 0");
    for (std::size_t j = 0; j < K; ++j) {
      if (!(alpha_[i][j] >= 0.0) || !std::isfinite(alpha_[i][j])) throw ConfigError("alpha must be finite and >= 0");
      if (!(beta_[i][j] > 0.0) || !std::isfinite(beta_[i][j])) throw ConfigError("beta must be finite and > 0");
    }
  }
}

HawkesExp HawkesExp::random(int num_marks, RngStream& rng, const Law& law) {
  if (num_marks < 1) throw ConfigError("Hawkes model needs at least one mark");
  const auto K = static_cast<std::size_t>(num_marks);
  auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  std::vector<std::vector<double>> alpha(K, std::vector<double>(K)), beta(K, std::vector<double>(K));
  std::vector<double> mu(K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      const bool same_block = law.block <= 0 || i / law.block == j / law.block;
      alpha[i][j] = same_block ? unif(law.alpha_lo, law.alpha_hi) : 0.0;
      if (i != j) alpha[i][j] *= law.off_diagonal_scale;
    }
  for (auto& row : beta)
    for (double& b : row) b = unif(law.beta_lo, law.beta_hi);
  for (double& m : mu) m = unif(law.mu_lo, law.mu_hi);
  return HawkesExp(std::move(mu), std::move(alpha), std::move(beta));
}

std::unique_ptr<IntensityTracker> HawkesExp::tracker() const { return std::make_unique<HawkesTracker>(*this); }

SelfCorrecting::SelfCorrecting(std::vector<double> eta, std::vector<std::vector<double>> delta)
    : eta_(std::move(eta)), delta_(std::move(delta)) {
  if (eta_.empty()) throw ConfigError("self-correcting model needs at least one mark");
  check_square(delta_, eta_.size(), "delta");
  for (double e : eta_)
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("eta must be finite and > 0");
  for (const auto& row : delta_)
    for (double d : row)
      if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("delta must be finite and > 0");
}

SelfCorrecting SelfCorrecting::random(int num_marks, RngStream& rng, double delta_lo, double delta_hi,
                                      double eta_lo, double eta_hi) {
  if (num_marks < 1) throw ConfigError("self-correcting model needs at least one mark");
  const auto K = static_cast<std::size_t>(num_marks);
  std::vector<std::vector<double>> delta(K, std::vector<double>(K));
  std::vector<double> eta(K);
  for (auto& row : delta)
    for (double& d : row) d = delta_lo + (delta_hi - delta_lo) * rng.uniform();
  for (double& e : eta) e = eta_lo + (eta_hi - eta_lo) * rng.uniform();
  return SelfCorrecting(std::move(eta), std::move(delta));
}

std::unique_ptr<IntensityTracker> SelfCorrecting::tracker() const {
  return std::make_unique<SelfCorrectingTracker>(*this);
}

PoissonMtpp::PoissonMtpp(std::vector<double> rates) : marks_(static_cast<int>(rates.size())) {
  if (rates.empty()) throw ConfigError("Poisson model needs at least one mark");
  for (double r : rates)
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("Poisson rates must be finite and >= 0");
  rates_.push_back(std::move(rates));
}

PoissonMtpp::PoissonMtpp(std::vector<double> times, std::vector<std::vector<double>> rates)
    : times_(std::move(times)), rates_(std::move(rates)) {
  if (times_.empty() || rates_.size() != times_.size()) throw ConfigError("rate table must have one row per knot");
  marks_ = static_cast<int>(rates_.front().size());
  if (marks_ < 1) throw ConfigError("Poisson model needs at least one mark");
  Grid check(times_);
  for (const auto& row : rates_) {
    if (static_cast<int>(row.size()) != marks_) throw ConfigError("rate rows must have equal length");
    for (double r : row)
      if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("Poisson rates must be finite and >= 0");
  }
}

void PoissonMtpp::rate(double t, std::span<double> out) const {
  if (times_.empty() || t <= times_.front()) {
    std::copy(rates_.front().begin(), rates_.front().end(), out.begin());
    return;
  }
  if (t >= times_.back()) {
    std::copy(rates_.back().begin(), rates_.back().end(), out.begin());
    return;
  }
  const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  for (int k = 0; k < marks_; ++k) out[k] = (1.0 - w) * rates_[lo][k] + w * rates_[hi][k];
}

double PoissonMtpp::rate_integral(int k, double t0, double t1) const {
  if (t1 <= t0) return 0.0;
  if (times_.empty()) return rates_.front()[k] * (t1 - t0);
  // Exact integral of the piecewise linear rate: trapezoid over knots in range.
  std::vector<double> pts{t0};
  for (double knot : times_)
    if (knot > t0 && knot < t1) pts.push_back(knot);
  pts.push_back(t1);
  std::vector<double> lam(static_cast<std::size_t>(marks_));
  double total = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    rate(pts[i], lam);
    if (i > 0) total += 0.5 * (prev + lam[k]) * (pts[i] - pts[i - 1]);
    prev = lam[k];
  }
  return total;
}

std::unique_ptr<IntensityTracker> PoissonMtpp::tracker() const { return std::make_unique<PoissonTracker>(*this); }

std::vector<double> marked_intensity(const MtppModel& model, double t, const EventSequence& history) {
  history.validate(model.num_marks());
  if (t < history.last_time()) throw ConfigError("non-causal evaluation");
  auto tr = model.tracker(history);
  std::vector<double> out(static_cast<std::size_t>(model.num_marks()));
  tr->intensity(t, out);
  return out;
}

double thinning_extend(IntensityTracker& tracker, double t_start, double t_end, RngStream& rng,
                       std::vector<Event>& out, const ThinningOptions& options, std::size_t stop_after) {
  if (t_end < t_start) throw ConfigError("thinning window is reversed");
  if (!(options.segment > 0.0)) throw ConfigError("thinning segment must be positive");
  std::vector<double> lam(static_cast<std::size_t>(tracker.num_marks()));
  std::size_t added = 0;
  double t = std::max(t_start, tracker.last_event_time());
  while (t < t_end) {
    const double seg_end = std::min(t_end, t + options.segment);
    const double c = tracker.dominating_rate(t, seg_end);
    if (!std::isfinite(c)) throw NumericError("dominating rate is not finite");
    if (c <= 0.0) {
      t = seg_end;
      continue;
    }
    const double cand = t + rng.exponential(c);
    if (cand > seg_end) {
      t = seg_end;
      continue;
    }
    t = cand;
    tracker.intensity(t, lam);
    const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
    if (total > c * (1.0 + 1e-9)) throw NumericError("dominating rate violated");
    if (rng.uniform() * c > total) continue;
    const Event e{t, static_cast<Mark>(draw_index(lam, total, rng))};
    tracker.push(e);
    out.push_back(e);
    if (++added > options.max_events) throw NumericError("thinning exceeded the event cap");
    if (added == stop_after) return t;
  }
  return std::max(t, t_end);
}

EventSequence thinning_sample(const MtppModel& model, double t_start, double t_end, const EventSequence& history,
                              RngStream& rng, const ThinningOptions& options) {
  history.validate(model.num_marks());
  if (t_start < history.last_time()) throw ConfigError("non-causal evaluation");
  auto tr = model.tracker(history);
  EventSequence seq = history;
  thinning_extend(*tr, t_start, t_end, rng, seq.events, options);
  seq.window_end = std::max(t_end, history.window_end);
  return seq;
}

namespace {

template <class Fn>
void walk_panels(const MtppModel& model, const EventSequence& seq, double tau, Fn&& fn) {
  seq.validate(model.num_marks());
  auto tr = model.tracker();
  double t = 0.0;
  for (const auto& e : seq.events) {
    if (e.time > tau) break;
    fn(*tr, t, e.time, &e);
    tr->push(e);
    t = e.time;
  }
  fn(*tr, t, tau, static_cast<const Event*>(nullptr));
}

}  // namespace

double compensator(const MtppModel& model, const EventSequence& sequence, double tau, int points) {
  const MarkMask all = full_mask(model.num_marks());
  double total = 0.0;
  walk_panels(model, sequence, tau, [&](const IntensityTracker& tr, double t0, double t1, const Event*) {
    total += tr.integral(t0, t1, all, points);
  });
  return total;
}

double log_likelihood(const MtppModel& model, const EventSequence& sequence, double tau, int points) {
  const MarkMask all = full_mask(model.num_marks());
  std::vector<double> lam(static_cast<std::size_t>(model.num_marks()));
  double ll = 0.0;
  walk_panels(model, sequence, tau, [&](const IntensityTracker& tr, double t0, double t1, const Event* e) {
    ll -= tr.integral(t0, t1, all, points);
    if (e) {
      tr.intensity(e->time, lam);
      ll += lam[e->mark] > 0.0 ? std::log(lam[e->mark]) : -kInf;
    }
  });
  return ll;
}

double next_event_cdf(const MtppModel& model, const EventSequence& history, double t, int points) {
  history.validate(model.num_marks());
  const double start = history.window_end;
  if (t < start) throw ConfigError("non-causal evaluation");
  auto tr = model.tracker(history);
  return -std::expm1(-tr->integral(start, t, full_mask(model.num_marks()), points));
}

double survival_weighted_integral(const IntensityTracker& tracker, double t0, double t1, const MarkMask& num,
                                  const MarkMask& den, double& cumulative, int steps) {
  if (t1 <= t0) return 0.0;
  steps = std::max(steps, 1);
  std::vector<double> lam(static_cast<std::size_t>(tracker.num_marks()));
  auto ratio_at = [&](double t) {
    tracker.intensity(t, lam);
    double n = 0.0, d = 0.0;
    for (std::size_t k = 0; k < lam.size(); ++k) {
      if (den[k]) d += lam[k];
      if (num[k]) n += lam[k];
    }
    return d > 0.0 ? n / d : 0.0;
  };
  double total = 0.0;
  double prev_t = t0, prev_r = ratio_at(t0), prev_s = std::exp(-cumulative);
  for (int i = 1; i <= steps; ++i) {
    const double t = i == steps ? t1 : t0 + (t1 - t0) * i / steps;
    cumulative += tracker.integral(prev_t, t, den);
    const double s = std::exp(-cumulative);
    const double r = ratio_at(t);
    total += 0.5 * (prev_r + r) * (prev_s - s);
    prev_t = t;
    prev_r = r;
    prev_s = s;
  }
  return total;
}

double next_mark_prob(const MtppModel& model, const EventSequence& history, const MarkMask& a, double lo, double hi,
                      int points) {
  history.validate(model.num_marks());
  if (static_cast<int>(a.size()) != model.num_marks()) throw ConfigError("mark mask size mismatch");
  auto tr = model.tracker(history);
  return next_mark_prob(*tr, history.window_end, a, lo, hi, points);
}

double next_mark_prob(const IntensityTracker& tracker, double start, const MarkMask& a, double lo, double hi,
                      int points) {
  if (lo < start) throw ConfigError("lower bound precedes the end of history");
  if (hi < lo) throw ConfigError("bounds are reversed");
  const auto* tr = &tracker;
  const MarkMask all = full_mask(tracker.num_marks());
  double cumulative = tr->integral(start, lo, all);
  if (std::isfinite(hi)) return survival_weighted_integral(*tr, lo, hi, a, all, cumulative, points);
  // Open-ended: integrate chunks of growing length until survival is negligible.
  double total = 0.0, t = lo, len = 1.0;
  for (int chunk = 0; chunk < 64 && std::exp(-cumulative) >= 1e-10; ++chunk) {
    total += survival_weighted_integral(*tr, t, t + len, a, all, cumulative, points);
    t += len;
    len *= 2.0;
  }
  return total;
}

}  // namespace lrq
