#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>

namespace lrq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct EstimateSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;  // divisor n - 1
  double se = 0.0;
  std::string method;
  std::map<std::string, double> extra;
};

/// Single-pass Welford accumulator; partial results merge associatively.
class Accumulator {
 public:
  void add(double x);
  void merge(const Accumulator& other);

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;

  EstimateSummary summary(std::string method = {}) const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

EstimateSummary mc_accumulate(std::span<const double> samples, std::string method = {});

/// Builds a summary from an explicit mean and per-sample variance.
EstimateSummary make_summary(std::size_t n, double mean, double var, std::string method = {});

/// var(b) / var(a); kInf when only a is degenerate.
double relative_efficiency(const EstimateSummary& a, const EstimateSummary& b);

}  // namespace lrq
