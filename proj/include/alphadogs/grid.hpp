#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "alphadogs/errors.hpp"

namespace adogs {

using Point = Eigen::VectorXd;

// Dyadic Cartesian grid over the box [lower, upper].
//
// At level l each axis is split into 2^l equal cells, so the nodes on axis j
// are lower_j + (upper_j - lower_j) * m / 2^l for m = 0..2^l.  Both box faces
// are nodes at every level, and every level-l node is also a node of all finer
// levels.  On the unit box the node coordinates m / 2^l are exact doubles
// (for l <= 52), which makes "is this point a grid node" a plain equality
// test and keeps point identity stable across refinements.
class GridLevel {
 public:
  // Past 2^52 subdivisions the node spacing drops below one ulp of the
  // box span and node coordinates stop being exact.
  static constexpr int kMaxLevel = 52;

  GridLevel(Point lower, Point upper, int level)
      : lower_(std::move(lower)), upper_(std::move(upper)), level_(level) {
    if (lower_.size() == 0 || lower_.size() != upper_.size())
      throw std::invalid_argument("GridLevel: bounds dimension mismatch");
    if (level_ < 0 || level_ > kMaxLevel)
      throw std::invalid_argument("GridLevel: level must be in [0, 52]");
    for (Eigen::Index j = 0; j < lower_.size(); ++j) {
      if (!(lower_[j] < upper_[j]) || !std::isfinite(lower_[j]) ||
          !std::isfinite(upper_[j]))
        throw std::invalid_argument("GridLevel: need finite lower < upper");
    }
  }

  // Unit box [0,1]^dim, the optimizer's internal domain.
  static GridLevel unit(int dim, int level) {
    return GridLevel(Point::Zero(dim), Point::Ones(dim), level);
  }

  int dimension() const { return static_cast<int>(lower_.size()); }
  int level() const { return level_; }
  std::int64_t subdivisions() const { return std::int64_t{1} << level_; }
  const Point& lower() const { return lower_; }
  const Point& upper() const { return upper_; }

  GridLevel refined() const { return GridLevel(lower_, upper_, level_ + 1); }

  // Nodes per axis is 2^l + 1; total count returned as double since it
  // overflows 64 bits already for moderate level * dimension.
  double node_count() const {
    return std::pow(static_cast<double>(subdivisions()) + 1.0, dimension());
  }

  // Largest possible distance between a point of the box and its quantized
  // image: half a cell diagonal, ||upper - lower|| / 2^(l+1).
  double max_quantization_error() const {
    return (upper_ - lower_).norm() / (2.0 * static_cast<double>(subdivisions()));
  }

  // Coordinate of node m on axis j.  The endpoints are returned exactly.
  double node(Eigen::Index axis, std::int64_t m) const {
    const std::int64_t n = subdivisions();
    if (m <= 0) return lower_[axis];
    if (m >= n) return upper_[axis];
    const double t = static_cast<double>(m) / static_cast<double>(n);
    return lower_[axis] + (upper_[axis] - lower_[axis]) * t;
  }

  // Nearest grid node, ties rounded away from the lower bound.  Points are
  // clamped into the box if they are within a 1e-9 relative slack of it;
  // anything further out throws.
  Point quantize(const Point& x) const {
    if (x.size() != lower_.size())
      throw std::invalid_argument("GridLevel::quantize: dimension mismatch");
    const std::int64_t n = subdivisions();
    Point out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double span = upper_[j] - lower_[j];
      const double slack = 1e-9 * span;
      if (!(x[j] >= lower_[j] - slack) || !(x[j] <= upper_[j] + slack))
        throw OutOfBounds("GridLevel::quantize: point outside the box");
      const double t = (x[j] - lower_[j]) / span;
      const double u = t * static_cast<double>(n);
      std::int64_t m = static_cast<std::int64_t>(std::floor(u + 0.5));
      if (m < 0) m = 0;
      if (m > n) m = n;
      out[j] = node(j, m);
    }
    return out;
  }

  bool contains(const Point& x) const {
    if (x.size() != lower_.size()) return false;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (!(x[j] >= lower_[j] && x[j] <= upper_[j])) return false;
    return true;
  }

  // True when x is exactly a node of this level.
  bool on_grid(const Point& x) const {
    if (!contains(x)) return false;
    const Point q = quantize(x);
    for (Eigen::Index j = 0; j < x.size(); ++j)
      if (q[j] != x[j]) return false;
    return true;
  }

 private:
  Point lower_;
  Point upper_;
  int level_;
};

}  // namespace adogs
