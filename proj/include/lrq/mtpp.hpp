#pragma once

#include <memory>
#include <span>
#include <vector>

#include "lrq/rng.hpp"

namespace lrq {

using Mark = int;

struct Event {
  double time = 0.0;
  Mark mark = 0;
  friend bool operator==(const Event&, const Event&) = default;
};

/// Events observed on [0, window_end]; times strictly increasing.
struct EventSequence {
  std::vector<Event> events;
  double window_end = 0.0;

  EventSequence() = default;
  /// window_end defaults to the last event time (0 when empty).
  explicit EventSequence(std::vector<Event> ev, double end = -1.0);

  double last_time() const { return events.empty() ? 0.0 : events.back().time; }
  std::size_t size() const { return events.size(); }
  void validate(int num_marks) const;
};

/// Dense 0/1 mask over marks; empty masks are allowed.
using MarkMask = std::vector<char>;
MarkMask mark_mask(int num_marks, std::span<const Mark> marks);
MarkMask full_mask(int num_marks);

/// Incrementally maintained conditional intensity of one trajectory.
/// Evaluation times must not precede the last pushed event.
class IntensityTracker {
 public:
  virtual ~IntensityTracker() = default;
  virtual std::unique_ptr<IntensityTracker> clone() const = 0;

  virtual int num_marks() const = 0;
  /// Per-mark intensity at t (left limit at an event time before it is pushed).
  virtual void intensity(double t, std::span<double> out) const = 0;
  virtual void push(const Event& e) = 0;
  /// Upper bound on the total intensity over (t0, t1] with no new events.
  virtual double dominating_rate(double t0, double t1) const = 0;
  /// Integral over [t0, t1] of the summed intensity of masked marks, assuming
  /// no events in between. points > 1 forces the trapezoid rule with that many
  /// points; otherwise closed forms are used when available.
  virtual double integral(double t0, double t1, const MarkMask& mask, int points = 0) const;

  double last_event_time() const { return last_time_; }

 protected:
  double trapezoid_integral(double t0, double t1, const MarkMask& mask, int points) const;
  double last_time_ = 0.0;
};

class MtppModel {
 public:
  virtual ~MtppModel() = default;
  virtual int num_marks() const = 0;
  virtual std::unique_ptr<IntensityTracker> tracker() const = 0;

  /// Tracker positioned after all events of history.
  std::unique_ptr<IntensityTracker> tracker(const EventSequence& history) const;
};

/// lambda_k(t) = mu_k + sum over events (T, M) of alpha[M][k] exp(-beta[M][k] (t - T)).
class HawkesExp final : public MtppModel {
 public:
  HawkesExp(std::vector<double> mu, std::vector<std::vector<double>> alpha,
            std::vector<std::vector<double>> beta);

  /// Parameters iid uniform on the given ranges; alpha is zeroed outside
  /// diagonal blocks of size block (block = 0 means dense).
  struct Law {
    double alpha_lo = 0.075, alpha_hi = 0.2;
    double beta_lo = 0.4, beta_hi = 1.2;
    double mu_lo = 0.1, mu_hi = 0.5;
    int block = 0;
    double off_diagonal_scale = 1.0;  // multiplies alpha[i][j], i != j
  };
  static HawkesExp random(int num_marks, RngStream& rng, const Law& law);
  static Law dense_law() { return {}; }
  static Law block_law() { return {0.3, 0.8, 0.4, 1.2, 0.1, 0.5, 5, 1.0}; }

  int num_marks() const override { return static_cast<int>(mu_.size()); }
  std::unique_ptr<IntensityTracker> tracker() const override;
  using MtppModel::tracker;

  const std::vector<double>& mu() const { return mu_; }
  const std::vector<std::vector<double>>& alpha() const { return alpha_; }
  const std::vector<std::vector<double>>& beta() const { return beta_; }

 private:
  std::vector<double> mu_;
  std::vector<std::vector<double>> alpha_;
  std::vector<std::vector<double>> beta_;
};

/// lambda_k(t) = exp(eta_k t - sum over events (T, M) of delta[M][k]).
class SelfCorrecting final : public MtppModel {
 public:
  SelfCorrecting(std::vector<double> eta, std::vector<std::vector<double>> delta);
  static SelfCorrecting random(int num_marks, RngStream& rng, double delta_lo = 0.3, double delta_hi = 0.8,
                               double eta_lo = 0.1, double eta_hi = 0.5);

  int num_marks() const override { return static_cast<int>(eta_.size()); }
  std::unique_ptr<IntensityTracker> tracker() const override;
  using MtppModel::tracker;

  const std::vector<double>& eta() const { return eta_; }
  const std::vector<std::vector<double>>& delta() const { return delta_; }

 private:
  std::vector<double> eta_;
  std::vector<std::vector<double>> delta_;
};

/// History-free rates: constant, or piecewise linear through (times, rates)
/// and held constant outside the table.
class PoissonMtpp final : public MtppModel {
 public:
  explicit PoissonMtpp(std::vector<double> rates);
  PoissonMtpp(std::vector<double> times, std::vector<std::vector<double>> rates);

  int num_marks() const override { return marks_; }
  std::unique_ptr<IntensityTracker> tracker() const override;
  using MtppModel::tracker;

  bool homogeneous() const { return times_.empty(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<std::vector<double>>& rates() const { return rates_; }
  void rate(double t, std::span<double> out) const;
  /// Integral of mark k's rate over [t0, t1].
  double rate_integral(int k, double t0, double t1) const;

 private:
  int marks_;
  std::vector<double> times_;
  std::vector<std::vector<double>> rates_;  // [knot][mark]; one row when homogeneous
};

/// Integral over [t0, t1] (no events inside) of lambda_num(s) exp(-C - Lambda_den(t0, s)),
/// with C = cumulative on entry. cumulative is advanced by Lambda_den(t0, t1).
/// num must be a subset of den. Uses the trapezoid rule in the survival
/// variable, which is exact when lambda_num / lambda_den is constant.
double survival_weighted_integral(const IntensityTracker& tracker, double t0, double t1, const MarkMask& num,
                                  const MarkMask& den, double& cumulative, int steps);

/// Intensity vector at t given history; t must not precede the last event.
std::vector<double> marked_intensity(const MtppModel& model, double t, const EventSequence& history);

struct ThinningOptions {
  double segment = 1.0;          // dominating rate refreshed at least this often
  std::size_t max_events = 1000000;
};

/// Appends events on (t_start, t_end] to tracker and out using Ogata thinning.
/// With stop_after > 0, stops at that many new events. Returns the time reached.
double thinning_extend(IntensityTracker& tracker, double t_start, double t_end, RngStream& rng,
                       std::vector<Event>& out, const ThinningOptions& options = {}, std::size_t stop_after = 0);

/// history followed by a thinning sample on (t_start, t_end].
EventSequence thinning_sample(const MtppModel& model, double t_start, double t_end, const EventSequence& history,
                              RngStream& rng, const ThinningOptions& options = {});

/// Sum of log intensities at events minus the compensator over [0, tau].
/// Returns -inf when some event has zero intensity.
double log_likelihood(const MtppModel& model, const EventSequence& sequence, double tau, int points = 0);

/// Compensator of the summed intensity over [0, tau].
double compensator(const MtppModel& model, const EventSequence& sequence, double tau, int points = 0);

/// P(next event by t | history observed through history.window_end).
double next_event_cdf(const MtppModel& model, const EventSequence& history, double t, int points = 0);

/// P(next event falls in [a, b] and has a mark in A | history); b may be
/// infinite, in which case integration extends until survival < 1e-10.
double next_mark_prob(const MtppModel& model, const EventSequence& history, const MarkMask& a, double lo,
                      double hi, int points = 1000);
/// Same, from a tracker whose history is observed through `start`.
double next_mark_prob(const IntensityTracker& tracker, double start, const MarkMask& a, double lo, double hi,
                      int points = 1000);

}  // namespace lrq
