#pragma once

#include <span>
#include <vector>

namespace lrq {

class Grid {
 public:
  explicit Grid(std::vector<double> points);

  static Grid uniform(double a, double b, int points);

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  double operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<double> points_;
};

double trapezoid(std::span<const double> values, const Grid& grid);

}  // namespace lrq
