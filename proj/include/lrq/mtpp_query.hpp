#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lrq/mtpp.hpp"
#include "lrq/stats.hpp"

namespace lrq {

/// Piecewise-constant forbidden-mark sets: forbidden[i] applies on
/// (boundaries[i], boundaries[i+1]]. Outside the schedule nothing is forbidden.
class MarkSchedule {
 public:
  MarkSchedule(std::vector<double> boundaries, std::vector<MarkMask> forbidden);
  /// Forbid `marks` on (start, end].
  static MarkSchedule single(double start, double end, MarkMask marks);

  const std::vector<double>& boundaries() const { return boundaries_; }
  const std::vector<MarkMask>& forbidden() const { return forbidden_; }
  double start() const { return boundaries_.front(); }
  double end() const { return boundaries_.back(); }
  /// Forbidden set active at t (left-open intervals); null outside.
  const MarkMask* forbidden_at(double t) const;
  void validate(int num_marks) const;

 private:
  std::vector<double> boundaries_;
  std::vector<MarkMask> forbidden_;
};

/// Base model with intensities of forbidden marks set to zero.
class RestrictedProposal final : public MtppModel {
 public:
  RestrictedProposal(const MtppModel& base, MarkSchedule schedule);
  int num_marks() const override { return base_->num_marks(); }
  std::unique_ptr<IntensityTracker> tracker() const override;
  using MtppModel::tracker;
  const MarkSchedule& schedule() const { return schedule_; }

 private:
  const MtppModel* base_;
  MarkSchedule schedule_;
};

struct MtppEstimateOptions {
  EventSequence history;     // conditioning events; queries start at history.window_end
  int points = 0;            // > 1 forces trapezoid integrals with this many points per panel
  int workers = 0;
  ThinningOptions thinning;
};

/// Mean over proposal samples of exp(-sum_i integral of lambda over forbidden
/// marks), the probability that no forbidden mark occurs in its interval.
EstimateSummary restricted_mark_is_estimate(const MtppModel& model, const MarkSchedule& schedule, std::size_t n,
                                            RngStream rng, const MtppEstimateOptions& options = {});

using SequencePredicate = std::function<bool(const EventSequence&)>;

/// Fraction of unrestricted samples on (history end, tau] satisfying predicate.
EstimateSummary naive_query_estimate(const MtppModel& model, const SequencePredicate& predicate, double tau,
                                     std::size_t n, RngStream rng, const MtppEstimateOptions& options = {});

/// P(first mark in A occurs by t) at every grid time t (absolute, not before
/// the history end), from one shared set of proposal samples.
std::vector<EstimateSummary> hitting_time_cdf_estimate(const MtppModel& model, const MarkMask& a,
                                                       const std::vector<double>& times, std::size_t n, RngStream rng,
                                                       const MtppEstimateOptions& options = {});

std::vector<EstimateSummary> naive_hitting_cdf(const MtppModel& model, const MarkMask& a,
                                               const std::vector<double>& times, std::size_t n, RngStream rng,
                                               const MtppEstimateOptions& options = {});

enum class NthMarkForm {
  direct,       // forbid A' between events n-1 and n; average exp(-int lambda_A')
  complement,   // forbid A instead; average 1 - exp(-int lambda_A)
  conditional,  // sample events 1..n-1 freely; average P(next mark in A | them)
};

struct NthMarkOptions : MtppEstimateOptions {
  NthMarkForm form = NthMarkForm::direct;
  double horizon = 10.0;  // first simulation window, doubled on each extension
  int max_extensions = 30;
};

/// P(the index-th event after the history has a mark in A); index >= 1.
EstimateSummary nth_mark_estimate(const MtppModel& model, const MarkMask& a, int index, std::size_t n, RngStream rng,
                                  const NthMarkOptions& options = {});

struct BeforeOptions : MtppEstimateOptions {
  double epsilon = 0.01;  // per-sample bound gap at which integration stops
  double tau = 0.0;       // > 0: integrate to this fixed horizon instead
  double tau_cap = 1e4;
  double step = 0.01;     // integration sub-step
};

struct BeforeResult {
  EstimateSummary estimate;  // midpoint of the bounds; biased
  EstimateSummary lower;
  EstimateSummary upper;
  double max_gap = 0.0;
  std::size_t capped = 0;  // samples that hit tau_cap before epsilon
};

/// P(a mark in A occurs before any mark in B).
BeforeResult a_before_b_estimate(const MtppModel& model, const MarkMask& a, const MarkMask& b, std::size_t n,
                                 RngStream rng, const BeforeOptions& options = {});

/// Throws NumericError when a [0,1]-valued sample set reports a variance
/// above the Bernoulli bound for its mean.
void check_bounded_variance(const EstimateSummary& s, double slack = 1e-12);

}  // namespace lrq
