#include "lrq/integrate.hpp"

#include <cmath>

#include "lrq/error.hpp"

namespace lrq {

Grid::Grid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("grid must be nonempty");
  if (!(points_.front() >= 0.0)) throw ConfigError("grid must start at a nonnegative time");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i])) throw ConfigError("grid points must be finite");
    if (i > 0 && !(points_[i] > points_[i - 1])) throw ConfigError("grid must be strictly increasing");
  }
}

Grid Grid::uniform(double a, double b, int points) {
  if (points < 2 || !(b > a)) throw ConfigError("uniform grid needs b > a and at least 2 points");
  std::vector<double> p(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) p[i] = a + (b - a) * i / (points - 1);
  p.back() = b;
  return Grid(std::move(p));
}

double trapezoid(std::span<const double> values, const Grid& grid) {
  if (values.size() != grid.size()) throw ConfigError("trapezoid: values and grid differ in length");
  if (values.size() < 2) throw ConfigError("trapezoid: need at least two points");
  double total = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i)
    total += (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]) / 2.0;
  return total;
}

}  // namespace lrq
