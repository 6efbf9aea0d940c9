#include "lrq/stats.hpp"

#include <cmath>

#include "lrq/error.hpp"

namespace lrq {

void Accumulator::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

void Accumulator::merge(const Accumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_);
  const double nb = static_cast<double>(o.n_);
  const double n = na + nb;
  const double d = o.mean_ - mean_;
  mean_ += d * nb / n;
  m2_ += o.m2_ + d * d * na * nb / n;
  n_ += o.n_;
}

double Accumulator::variance() const {
  if (n_ < 2) return 0.0;
  return std::max(0.0, m2_ / static_cast<double>(n_ - 1));
}

EstimateSummary Accumulator::summary(std::string method) const {
  if (n_ == 0) throw ConfigError("no samples");
  return make_summary(n_, mean_, variance(), std::move(method));
}

EstimateSummary make_summary(std::size_t n, double mean, double var, std::string method) {
  EstimateSummary s;
  s.n = n;
  s.mean = mean;
  s.var = n < 2 ? 0.0 : std::max(0.0, var);
  s.se = n == 0 ? 0.0 : std::sqrt(s.var / static_cast<double>(n));
  s.method = std::move(method);
  if (n == 1) s.extra["single_sample"] = 1.0;
  return s;
}

EstimateSummary mc_accumulate(std::span<const double> samples, std::string method) {
  if (samples.empty()) throw ConfigError("no samples");
  Accumulator acc;
  for (double x : samples) acc.add(x);
  return acc.summary(std::move(method));
}

double relative_efficiency(const EstimateSummary& a, const EstimateSummary& b) {
  if (a.var == 0.0 && b.var == 0.0) throw NumericError("both estimators degenerate");
  if (a.var == 0.0) return kInf;
  return b.var / a.var;
}

}  // namespace lrq
