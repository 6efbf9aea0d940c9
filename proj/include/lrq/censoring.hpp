#pragma once

#include <vector>

#include "lrq/mtpp.hpp"
#include "lrq/rng.hpp"

namespace lrq {

/// Observed mark sets, piecewise constant: observed[i] applies on
/// [breakpoints[i], breakpoints[i+1]). Times past the last breakpoint use the
/// last set; the window must start at breakpoints.front().
class CensorSchedule {
 public:
  CensorSchedule(std::vector<double> breakpoints, std::vector<MarkMask> observed);
  /// Every mark observed on [start, end].
  static CensorSchedule all_observed(int num_marks, double start, double end);
  /// `censored` hidden on [start, end], everything else observed.
  static CensorSchedule censor(int num_marks, const MarkMask& censored, double start, double end);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<MarkMask>& observed() const { return observed_; }
  double start() const { return breakpoints_.front(); }
  double end() const { return breakpoints_.back(); }
  const MarkMask& observed_at(double t) const;
  void validate(int num_marks) const;
  /// Throws ConfigError if an event carries a mark censored at its time.
  void check_sequence(const EventSequence& seq) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<MarkMask> observed_;
};

struct CensorOptions {
  std::size_t samples = 128;       // M
  int points = 1024;               // likelihood integration grid
  bool reuse = true;               // one bank for numerator and denominator
  bool weight_observed_events = true;
  int workers = 0;
  ThinningOptions thinning;
};

/// M proposal trajectories of censored events interleaved with a fixed
/// observed sequence, with per-node log weights and intensities cached.
/// Node j sits at times[j]; nodes flagged `after_event` hold right limits
/// just after an observed event at that time.
class CensoredSampleBank {
 public:
  CensoredSampleBank(const MtppModel& model, const CensorSchedule& schedule, const EventSequence& observed,
                     std::vector<double> times, std::vector<char> after_event, std::size_t samples, RngStream rng,
                     const CensorOptions& options);

  std::size_t samples() const { return samples_; }
  std::size_t nodes() const { return times_.size(); }
  int num_marks() const { return marks_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<char>& after_event() const { return after_event_; }
  /// log of the importance weight of trajectory i at node j.
  double log_weight(std::size_t i, std::size_t j) const { return log_weight_[i * times_.size() + j]; }
  double intensity(std::size_t i, std::size_t j, int k) const {
    return intensity_[(i * times_.size() + j) * marks_ + k];
  }

 private:
  std::size_t samples_;
  int marks_;
  std::vector<double> times_;
  std::vector<char> after_event_;
  std::vector<double> log_weight_;
  std::vector<double> intensity_;
};

struct CensoredCurves {
  std::vector<double> times;
  std::vector<std::vector<double>> intensity;  // [time][mark], 0 for censored marks
  std::vector<std::vector<double>> se;         // delta-method standard error
  std::vector<double> ess;                     // effective sample size of the weights
};

/// Weighted-average intensity of each observed mark over the bank(s).
/// `denominator` may alias `numerator` (shared samples).
CensoredCurves censored_curves(const CensoredSampleBank& numerator, const CensoredSampleBank& denominator,
                               const CensorSchedule& schedule);

/// Censored intensity at each grid time (left limits at observed events).
CensoredCurves censored_intensity(const MtppModel& model, const CensorSchedule& schedule,
                                  const EventSequence& observed, const std::vector<double>& grid, RngStream rng,
                                  const CensorOptions& options = {});

struct CensoredLikelihood {
  double censored = 0.0;
  double baseline = 0.0;
  double log_ratio = 0.0;  // censored - baseline
};

/// Log-likelihood of the observed sequence on [schedule.start(), tau] under
/// the censored intensity, trapezoid on a uniform grid refined at breakpoints
/// and observed events.
double censored_log_likelihood(const MtppModel& model, const CensorSchedule& schedule,
                               const EventSequence& observed, double tau, RngStream rng,
                               const CensorOptions& options = {});

/// Log-likelihood treating the observed events as the full history and the
/// censored intensities as zero.
double baseline_log_likelihood(const MtppModel& model, const CensorSchedule& schedule,
                               const EventSequence& observed, double tau);

CensoredLikelihood censored_likelihood_pair(const MtppModel& model, const CensorSchedule& schedule,
                                            const EventSequence& observed, double tau, RngStream rng,
                                            const CensorOptions& options = {});

struct RatioDiagnostics {
  double ratio = 0.0;
  double bias = 0.0;      // second-order bias of the ratio of means
  double variance = 0.0;  // second-order variance
  double corrected = 0.0; // ratio - bias
};

/// Taylor bias and variance of mean(fg) / mean(g). With shared = true the two
/// arrays are paired draws and must have equal length.
RatioDiagnostics ratio_bias_variance(const std::vector<double>& fg, const std::vector<double>& g, bool shared);

}  // namespace lrq
