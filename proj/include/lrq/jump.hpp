#pragma once

#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lrq/rng.hpp"

namespace lrq {

/// Hitting time value for "not realized within the horizon". Strictly larger
/// than any horizon and finite, so it survives CSV round trips.
inline constexpr double kNotHit = std::numeric_limits<double>::max();

/// Closed or open interval on one coordinate; infinite ends allowed.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;
  bool hi_open = false;
  bool contains(double v) const;
  bool empty() const;
};

/// Axis-aligned box; coordinates beyond axes.size() are unconstrained.
struct Box {
  std::vector<Interval> axes;
  bool contains(std::span<const double> x) const;
  bool empty() const;
  /// P(mean + scale * z in box) for z standard normal, scale diagonal.
  /// Zero scale entries act as point masses.
  double gaussian_mass(std::span<const double> mean, std::span<const double> scale) const;
};

/// Union of boxes. Mass computations sum over boxes and therefore assume the
/// boxes are disjoint.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<Box> boxes);
  static Region box(Box b) { return Region({std::move(b)}); }
  static Region at_least(double c, int dim = 1, int axis = 0);
  static Region below(double c, int dim = 1, int axis = 0);  // open at c
  static Region vertices(std::span<const int> vs);
  static Region everything();

  const std::vector<Box>& boxes() const { return boxes_; }
  bool empty() const { return boxes_.empty(); }
  bool contains(std::span<const double> x) const;
  double gaussian_mass(std::span<const double> mean, std::span<const double> scale) const;
  Region unite(const Region& other) const;
  Region intersect(const Region& other) const;

 private:
  std::vector<Box> boxes_;
};

/// State seen by a process: current time, value and jump history.
struct PathState {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> jump_times;
  std::vector<std::vector<double>> jump_marks;
};

/// A weighted jump increment; used for exact sums over discrete marks and
/// quadrature over continuous ones.
struct MarkNode {
  double weight;
  std::vector<double> increment;
};

/// dX = mu dt + diag(sigma) dW + nu dN with jump intensity lambda.
class JumpProcess {
 public:
  virtual ~JumpProcess() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<double> x0() const = 0;
  /// No drift or diffusion: the state only moves at jumps, and paths can be
  /// simulated exactly by thinning.
  virtual bool pure_jump() const = 0;
  /// Jump rate and mark law stay fixed between jumps.
  virtual bool constant_between_jumps() const { return false; }

  virtual void drift(const PathState& s, std::span<double> out) const;
  virtual void diffusion(const PathState& s, std::span<double> out) const;
  virtual double jump_rate(const PathState& s) const = 0;
  /// Bound on jump_rate over (s.t, t1] with no jumps; exact mode only.
  virtual double dominating_rate(const PathState& s, double t1) const;
  virtual std::vector<double> sample_mark(const PathState& s, RngStream& rng) const = 0;
  virtual std::vector<double> increment(const PathState& s, std::span<const double> mark) const = 0;
  /// Discrete marks or quadrature nodes for the jump increment; empty when
  /// not available (callers fall back to Monte Carlo).
  virtual std::vector<MarkNode> mark_nodes(const PathState& s) const;
  /// P(x + increment in region | a jump at s.t), or a negative value when no
  /// closed form exists.
  virtual double jump_region_mass(const PathState& s, const Region& region) const;
  /// P(mean + scale * z + increment in region | a jump), z standard normal and
  /// independent of the mark; negative when no specialised form exists.
  virtual double euler_jump_mass(const PathState& s, const Region& region, std::span<const double> mean,
                                 std::span<const double> scale) const;

  /// Records a jump with the given mark at s.t.
  void apply_jump(PathState& s, std::vector<double> mark) const;
};

/// Probability that a jump at state s lands in region, using closed forms,
/// mark nodes, or `inner` Monte Carlo draws from rng.
double jump_hit_probability(const JumpProcess& p, const PathState& s, const Region& region, int inner,
                            RngStream& rng);

/// Probability of one Euler step landing in a region, split by whether the
/// step carries a jump.
struct EulerHitParts {
  double no_jump = 0.0;
  double jump = 0.0;
  double total() const { return no_jump + jump; }
};

EulerHitParts euler_hit_parts(const JumpProcess& p, const PathState& s, const Region& region, double dt, int inner,
                              RngStream& rng);

/// P(X_{t+dt} in region | state) for one Euler step.
double euler_hit_probability(const JumpProcess& p, const PathState& s, const Region& region, double dt, int inner,
                             RngStream& rng);

struct JumpRecord {
  bool jumped = false;
  std::vector<double> mark;
};

/// One Euler step of size dt; advances s in place.
JumpRecord euler_step(const JumpProcess& p, PathState& s, double dt, RngStream& rng);

struct Path {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<char> jumped;
};

/// Euler path with step dt (dt <= 0 selects exact thinning, pure-jump only).
Path simulate_path(const JumpProcess& p, double horizon, double dt, RngStream& rng);

/// Generalized hitting time expression.
struct Ght {
  enum class Kind { hit, min, max, after, first_if_after, first_if_before };
  Kind kind = Kind::hit;
  Region region;              // target region for hit / after / first_if_*
  std::vector<Ght> children;  // operands; the prerequisite for after / first_if_*

  /// First visit of region.
  static Ght hit(Region r);
  static Ght min_of(std::vector<Ght> ts);
  static Ght max_of(std::vector<Ght> ts);
  /// First visit of region strictly after prereq realizes.
  static Ght after(Region r, Ght prereq);
  /// First visit of region, kept only if other realized strictly earlier.
  static Ght first_if_after(Region r, Ght other);
  /// First visit of region, kept only if other has not realized by then.
  static Ght first_if_before(Region r, Ght other);
};

/// Online evaluation of a Ght along a path.
class GhtTracker {
 public:
  explicit GhtTracker(const Ght& g);
  /// Returns true if any part of the expression changed state.
  bool observe(double t, std::span<const double> x);
  bool realized() const { return nodes_[0].time != kNotHit; }
  double time() const { return nodes_[0].time; }
  /// States that would realize the time at the next observation.
  Region region() const;

 private:
  struct Node {
    Ght::Kind kind;
    Region region;
    std::vector<int> children;
    double time = kNotHit;
    bool dead = false;
  };
  int build(const Ght& g);
  void update(int i, double t, std::span<const double> x, bool& changed);
  Region node_region(int i) const;
  std::size_t dead_count() const;
  std::vector<Node> nodes_;
};

double evaluate_ght(const Path& path, const Ght& g);

/// lambda^T at the path state: jump intensity mass landing in the current region.
double hitting_intensity(const JumpProcess& p, const GhtTracker& tracker, const PathState& s, int inner,
                         RngStream& rng);

// Example processes.

struct MertonParams {
  double x0 = 1.0, r = 0.02, mu = 0.0, delta = 0.3, lambda = 1.0, sigma = 0.2;
  bool printed_drift = false;  // include the -sigma^2/2 term in the price drift
  int quadrature = 48;
};

class MertonProcess final : public JumpProcess {
 public:
  explicit MertonProcess(MertonParams p = {});
  std::string name() const override { return "merton"; }
  int dim() const override { return 1; }
  std::vector<double> x0() const override { return {p_.x0}; }
  bool pure_jump() const override { return false; }
  bool constant_between_jumps() const override { return true; }
  void drift(const PathState& s, std::span<double> out) const override;
  void diffusion(const PathState& s, std::span<double> out) const override;
  double jump_rate(const PathState&) const override { return p_.lambda; }
  double dominating_rate(const PathState&, double) const override { return p_.lambda; }
  std::vector<double> sample_mark(const PathState& s, RngStream& rng) const override;
  std::vector<double> increment(const PathState& s, std::span<const double> mark) const override;
  std::vector<MarkNode> mark_nodes(const PathState& s) const override;
  double euler_jump_mass(const PathState& s, const Region& region, std::span<const double> mean,
                         std::span<const double> scale) const override;
  const MertonParams& params() const { return p_; }
  /// First passage over c * x0.
  Ght passage(double c) const { return Ght::hit(Region::at_least(c * p_.x0)); }

 private:
  MertonParams p_;
  double k_;
  std::vector<double> nodes_, weights_;  // over the log jump size
  std::vector<double> znodes_, zweights_;
};

struct DriftExitParams {
  double x0 = 1.0, b = 1.0, c = 3.0;
  int quadrature = 32;
};

/// Geometric Brownian motion with drift b t, downward jumps by a uniform
/// fraction, self-correcting jump intensity exp(t - N).
class DriftExitProcess final : public JumpProcess {
 public:
  explicit DriftExitProcess(DriftExitParams p = {});
  std::string name() const override { return "drift_exit"; }
  int dim() const override { return 1; }
  std::vector<double> x0() const override { return {p_.x0}; }
  bool pure_jump() const override { return false; }
  void drift(const PathState& s, std::span<double> out) const override;
  void diffusion(const PathState& s, std::span<double> out) const override;
  double jump_rate(const PathState& s) const override;
  std::vector<double> sample_mark(const PathState& s, RngStream& rng) const override;
  std::vector<double> increment(const PathState& s, std::span<const double> mark) const override;
  std::vector<MarkNode> mark_nodes(const PathState& s) const override;
  double euler_jump_mass(const PathState& s, const Region& region, std::span<const double> mean,
                         std::span<const double> scale) const override;
  /// Return below c after first reaching c or more.
  Ght exit_time() const;

 private:
  DriftExitParams p_;
  std::vector<double> nodes_, weights_;
};

struct CtmcParams {
  int vertices = 6;
  double rate = 1.0;
  double temperature = 1.0;
  int start = 0;
};

/// Continuous-time random walk on a complete graph; the state is the vertex.
class CtmcProcess final : public JumpProcess {
 public:
  CtmcProcess(std::vector<std::vector<double>> transition, double rate, int start = 0);
  /// Rows are softmax(z / temperature) with z iid uniform on [0, 1].
  static CtmcProcess random(const CtmcParams& p, RngStream& rng);
  std::string name() const override { return "ctmc_cover"; }
  int dim() const override { return 1; }
  std::vector<double> x0() const override { return {static_cast<double>(start_)}; }
  bool pure_jump() const override { return true; }
  bool constant_between_jumps() const override { return true; }
  double jump_rate(const PathState&) const override { return rate_; }
  double dominating_rate(const PathState&, double) const override { return rate_; }
  std::vector<double> sample_mark(const PathState& s, RngStream& rng) const override;
  std::vector<double> increment(const PathState& s, std::span<const double> mark) const override;
  std::vector<MarkNode> mark_nodes(const PathState& s) const override;
  int vertices() const { return static_cast<int>(p_.size()); }
  const std::vector<std::vector<double>>& transition() const { return p_; }
  double rate() const { return rate_; }
  int start() const { return start_; }
  /// Time at which every vertex has been visited.
  Ght cover_time() const;

 private:
  std::vector<std::vector<double>> p_;
  double rate_;
  int start_;
};

struct GaussHawkesParams {
  double mu = 1.0;
  double variance_floor = 1e-6;
};

/// Self-exciting process with 3-d Gaussian marks centred on earlier marks.
/// The state is the most recent mark (origin before the first event).
class GaussHawkesProcess final : public JumpProcess {
 public:
  explicit GaussHawkesProcess(GaussHawkesParams p = {});
  std::string name() const override { return "gauss_hawkes"; }
  int dim() const override { return 3; }
  std::vector<double> x0() const override { return {0.0, 0.0, 0.0}; }
  bool pure_jump() const override { return true; }
  double jump_rate(const PathState& s) const override;
  double dominating_rate(const PathState& s, double t1) const override;
  std::vector<double> sample_mark(const PathState& s, RngStream& rng) const override;
  std::vector<double> increment(const PathState& s, std::span<const double> mark) const override;
  double jump_region_mass(const PathState& s, const Region& region) const override;
  /// Orthant regions R_1..R_5 (index 1-based as in the usual listing).
  static Region orthant(int index);

 private:
  GaussHawkesParams p_;
};

/// Independent counting coordinates: coordinate k jumps by +1 at rate rates[k].
class PoissonJumpProcess final : public JumpProcess {
 public:
  explicit PoissonJumpProcess(std::vector<double> rates);
  std::string name() const override { return "poisson"; }
  int dim() const override { return static_cast<int>(rates_.size()); }
  std::vector<double> x0() const override { return std::vector<double>(rates_.size(), 0.0); }
  bool pure_jump() const override { return true; }
  bool constant_between_jumps() const override { return true; }
  double jump_rate(const PathState&) const override { return total_; }
  double dominating_rate(const PathState&, double) const override { return total_; }
  std::vector<double> sample_mark(const PathState& s, RngStream& rng) const override;
  std::vector<double> increment(const PathState& s, std::span<const double> mark) const override;
  std::vector<MarkNode> mark_nodes(const PathState& s) const override;
  /// First jump of coordinate k.
  Ght first_jump(int k) const;

 private:
  std::vector<double> rates_;
  double total_;
};

/// Builds an example process from a name and numeric parameters; unknown
/// names or parameters throw ConfigError.
std::unique_ptr<JumpProcess> make_example_process(const std::string& name, const std::map<std::string, double>& params,
                                                  RngStream rng);

/// Gauss-Hermite (probabilists') nodes and weights summing to 1.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);
/// Gauss-Legendre nodes on [0, 1] with weights summing to 1.
void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights);

double normal_cdf(double x);

}  // namespace lrq
