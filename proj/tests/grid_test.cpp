#include "alphadogs/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "alphadogs/errors.hpp"
#include "alphadogs/rng.hpp"

namespace {

using adogs::GridLevel;
using adogs::Point;

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

TEST(GridLevel, MaxQuantizationError1D) {
  GridLevel g = GridLevel::unit(1, 3);
  EXPECT_DOUBLE_EQ(g.max_quantization_error(), 0.0625);
}

TEST(GridLevel, MaxQuantizationError2DLevel0) {
  GridLevel g = GridLevel::unit(2, 0);
  EXPECT_DOUBLE_EQ(g.max_quantization_error(), std::sqrt(2.0) / 2.0);
}

TEST(GridLevel, QuantizeNearestNode) {
  GridLevel g = GridLevel::unit(2, 1);
  const Point q = g.quantize(pt({0.3, 0.6}));
  EXPECT_DOUBLE_EQ(q[0], 0.5);
  EXPECT_DOUBLE_EQ(q[1], 0.5);
}

TEST(GridLevel, TiesRoundAwayFromLowerBound) {
  GridLevel g = GridLevel::unit(1, 1);  // nodes 0, 0.5, 1
  EXPECT_DOUBLE_EQ(g.quantize(pt({0.25}))[0], 0.5);
  EXPECT_DOUBLE_EQ(g.quantize(pt({0.75}))[0], 1.0);
}

TEST(GridLevel, QuantizePointThreeAtLevelThree) {
  // Level-3 nodes are k/8; 0.3 sits between 0.25 (distance 0.05) and
  // 0.375 (distance 0.075), so it lands on 0.25.
  GridLevel g = GridLevel::unit(1, 3);
  EXPECT_DOUBLE_EQ(g.quantize(pt({0.3}))[0], 0.25);
}

TEST(GridLevel, QuantizeIsIdempotent) {
  adogs::RngStream r(77, 0);
  for (int level = 0; level <= 6; ++level) {
    GridLevel g = GridLevel::unit(3, level);
    for (int i = 0; i < 200; ++i) {
      Point x(3);
      for (int j = 0; j < 3; ++j) x[j] = r.uniform01();
      const Point q = g.quantize(x);
      const Point qq = g.quantize(q);
      for (int j = 0; j < 3; ++j) EXPECT_EQ(q[j], qq[j]);
    }
  }
}

TEST(GridLevel, EndpointsAreExactNodes) {
  GridLevel g(pt({24.0, 1.8}), pt({29.15, 4.0}), 5);
  const Point a = g.quantize(pt({24.0, 1.8}));
  const Point b = g.quantize(pt({29.15, 4.0}));
  EXPECT_EQ(a[0], 24.0);
  EXPECT_EQ(a[1], 1.8);
  EXPECT_EQ(b[0], 29.15);
  EXPECT_EQ(b[1], 4.0);
  EXPECT_TRUE(g.on_grid(a));
  EXPECT_TRUE(g.on_grid(b));
}

TEST(GridLevel, ErrorBoundHoldsForRandomPoints) {
  adogs::RngStream r(123, 0);
  for (int level = 0; level <= 6; ++level) {
    GridLevel g = GridLevel::unit(2, level);
    const double bound = g.max_quantization_error();
    for (int i = 0; i < 500; ++i) {
      Point x(2);
      x[0] = r.uniform01();
      x[1] = r.uniform01();
      EXPECT_LE((x - g.quantize(x)).norm(), bound * (1.0 + 1e-14));
    }
  }
}

TEST(GridLevel, RefinementKeepsCoarseNodes) {
  GridLevel g = GridLevel::unit(2, 3);
  GridLevel f = g.refined();
  EXPECT_EQ(f.level(), 4);
  for (std::int64_t i = 0; i <= g.subdivisions(); ++i) {
    for (std::int64_t j = 0; j <= g.subdivisions(); ++j) {
      Point x(2);
      x[0] = g.node(0, i);
      x[1] = g.node(1, j);
      EXPECT_TRUE(f.on_grid(x));  // bitwise: coarse nodes survive refinement
    }
  }
}

TEST(GridLevel, NodeCount) {
  EXPECT_DOUBLE_EQ(GridLevel::unit(1, 3).node_count(), 9.0);
  EXPECT_DOUBLE_EQ(GridLevel::unit(2, 2).node_count(), 25.0);
}

TEST(GridLevel, SubdivisionsDoublePerLevel) {
  for (int level = 0; level <= 10; ++level) {
    EXPECT_EQ(GridLevel::unit(1, level).subdivisions(), std::int64_t{1} << level);
  }
}

TEST(GridLevel, OutOfBoundsThrows) {
  GridLevel g = GridLevel::unit(1, 2);
  EXPECT_THROW(g.quantize(pt({1.5})), adogs::OutOfBounds);
  EXPECT_THROW(g.quantize(pt({-0.1})), adogs::OutOfBounds);
  // A hair outside the box is clamped rather than rejected.
  EXPECT_DOUBLE_EQ(g.quantize(pt({1.0 + 1e-12}))[0], 1.0);
}

TEST(GridLevel, InvalidConstructionThrows) {
  EXPECT_THROW(GridLevel(pt({0.0}), pt({0.0}), 1), std::invalid_argument);
  EXPECT_THROW(GridLevel(pt({1.0}), pt({0.0}), 1), std::invalid_argument);
  EXPECT_THROW(GridLevel(pt({0.0, 0.0}), pt({1.0}), 1), std::invalid_argument);
  EXPECT_THROW(GridLevel::unit(1, -1), std::invalid_argument);
  EXPECT_THROW(GridLevel::unit(1, 53), std::invalid_argument);
}

TEST(GridLevel, GeneralBoxQuantizeStaysInside) {
  GridLevel g(pt({24.0, 1.8}), pt({29.15, 4.0}), 3);
  adogs::RngStream r(5, 5);
  for (int i = 0; i < 300; ++i) {
    Point x(2);
    x[0] = 24.0 + 5.15 * r.uniform01();
    x[1] = 1.8 + 2.2 * r.uniform01();
    const Point q = g.quantize(x);
    EXPECT_TRUE(g.contains(q));
    EXPECT_TRUE(g.on_grid(q));
  }
}

}  // namespace
