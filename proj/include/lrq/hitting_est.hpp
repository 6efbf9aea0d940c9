#pragma once

#include <string>
#include <vector>

#include "lrq/jump.hpp"
#include "lrq/stats.hpp"

namespace lrq {

enum class HitMethod { NE, TR, IS, ISP };

std::string to_string(HitMethod m);
HitMethod parse_hit_method(const std::string& s);

struct HitOptions {
  bool exact = false;               // thinning (pure-jump processes) instead of Euler steps
  double dt = 0.01;                 // Euler step
  double integration_step = 0.01;   // exact mode: panel length for intensity integrals
  bool condition_diffusion = true;  // Euler IS: reject whole steps landing in the region, not only jumps
  int inner_samples = 256;          // Monte Carlo draws for hit masses without closed form
  int max_retries = 64;             // rejection attempts per Euler step under the proposal
  int workers = 0;
};

struct CdfCurve {
  std::vector<double> grid;
  std::vector<EstimateSummary> points;
  std::string method;
  bool exact = false;
  double dt = 0.0;
};

/// Estimates P(T <= t) on the grid with each requested method. NE and TR
/// share one bank of base paths, IS and ISP one bank of proposal paths.
std::vector<CdfCurve> cdf_estimate(const JumpProcess& process, const Ght& ght, const std::vector<double>& grid,
                                   std::size_t n, const std::vector<HitMethod>& methods, RngStream rng,
                                   const HitOptions& options = {});

/// P(T_1 < ... < T_K <= t) by importance sampling with the ordering enforced
/// by the proposal.
CdfCurve ordered_estimate(const JumpProcess& process, const std::vector<Ght>& ghts, const std::vector<double>& grid,
                          std::size_t n, RngStream rng, const HitOptions& options = {});

/// Naive counterpart of ordered_estimate.
CdfCurve ordered_naive(const JumpProcess& process, const std::vector<Ght>& ghts, const std::vector<double>& grid,
                       std::size_t n, RngStream rng, const HitOptions& options = {});

enum class JointVariant { ordered, unordered };

/// P(T_i <= t_i for all i). The ordered variant sums one term per ordering
/// (at most max_ordered hitting times), the unordered one a term per choice of
/// last hitting time. Terms use independent samples; variances add.
EstimateSummary joint_estimate(const JumpProcess& process, const std::vector<Ght>& ghts,
                               const std::vector<double>& times, std::size_t n, JointVariant variant, RngStream rng,
                               const HitOptions& options = {}, int max_ordered = 5);

EstimateSummary joint_naive(const JumpProcess& process, const std::vector<Ght>& ghts, const std::vector<double>& times,
                            std::size_t n, RngStream rng, const HitOptions& options = {});

/// eff[t][a][b] = var(b) / var(a); NaN where both variances vanish, kInf
/// where only a's does.
struct EfficiencyTable {
  std::vector<double> grid;
  std::vector<std::string> methods;
  std::vector<std::vector<std::vector<double>>> eff;
};

EfficiencyTable efficiency_report(const std::vector<CdfCurve>& curves);

}  // namespace lrq
