#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/geometry.hpp"
#include "alphadogs/grid.hpp"
#include "alphadogs/regression.hpp"

namespace adogs {

// Saturated inverse-range factor used to normalize measurements (and their
// uncertainties) to roughly unit spread before each fit/search pass.  The
// raw factor r = 1 / (max y - min y) is clamped into [r_lower, r_upper]
// by the ramp construction r_s = r_l + R(r - r_l) - R(r - r_u).
inline double measurement_scale(const Eigen::VectorXd& values,
                                double r_lower = 1e-3,
                                double r_upper = 1e3) {
  if (values.size() == 0) return 1.0;
  const double range = values.maxCoeff() - values.minCoeff();
  if (!std::isfinite(range) || range <= 0.0) return r_upper;
  const double r = 1.0 / range;
  auto ramp = [](double v) { return v > 0.0 ? v : 0.0; };
  return r_lower + ramp(r - r_lower) - ramp(r - r_upper);
}

// Inputs shared by the two acquisition searches of one iteration.  Values
// and sigmas are already scaled; their order matches triangulation->points().
struct SearchContext {
  const SurrogateModel* model = nullptr;
  const Triangulation* triangulation = nullptr;
  Eigen::VectorXd scaled_values;
  Eigen::VectorXd scaled_sigmas;
  double K = 0.5;
  double alpha = 0.5;
};

struct DiscreteSearchResult {
  int index = -1;
  double value = std::numeric_limits<double>::infinity();
};

struct ContinuousSearchResult {
  Point location;
  double value = std::numeric_limits<double>::infinity();
  int simplex = -1;
};

// Exploitation test over the datapoints themselves:
//   s_d(x_i) = min{p(x_i), 2 y_i - p(x_i)} - alpha sigma_i.
// Exact scan; ties go to the lowest index.
inline DiscreteSearchResult discrete_search(const SearchContext& ctx) {
  const std::vector<Point>& pts = ctx.triangulation->points();
  const auto m = static_cast<Eigen::Index>(pts.size());
  if (m == 0) throw std::invalid_argument("discrete_search: no points");
  if (ctx.scaled_values.size() != m || ctx.scaled_sigmas.size() != m)
    throw std::invalid_argument("discrete_search: size mismatch");
  DiscreteSearchResult best;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double p = ctx.model->value(pts[i]);
    const double y = ctx.scaled_values[i];
    const double sd =
        std::min(p, 2.0 * y - p) - ctx.alpha * ctx.scaled_sigmas[i];
    if (sd < best.value) {
      best.value = sd;
      best.index = static_cast<int>(i);
    }
  }
  return best;
}

namespace detail {

// Objective restricted to one cell: s_c(x) = p(x) - K (R^2 - |x - Z|^2).
struct CellAcquisition {
  const SurrogateModel* model;
  const Simplex* cell;
  double K;

  double value(const Point& x) const {
    const double d2 = (x - cell->circumcenter).squaredNorm();
    const double r2 = cell->circumradius * cell->circumradius;
    return model->value(x) - K * (r2 - d2);
  }
  Point gradient(const Point& x) const {
    return model->gradient(x) + 2.0 * K * (x - cell->circumcenter);
  }
  Eigen::MatrixXd hessian(const Point& x) const {
    Eigen::MatrixXd h = model->hessian(x);
    h.diagonal().array() += 2.0 * K;
    return h;
  }
};

// Pulls x back inside cell s: clamps negative barycentric weights to zero,
// renormalizes, and rebuilds the point from the vertices.
inline Point clamp_into_cell(const Triangulation& tri, int s, const Point& x) {
  Eigen::VectorXd lam = tri.barycentric(s, x);
  bool clean = true;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] < 0.0) {
      lam[i] = 0.0;
      clean = false;
    }
  if (clean) return x;
  const double total = lam.sum();
  if (!(total > 0.0)) {
    lam.setConstant(1.0 / static_cast<double>(lam.size()));
  } else {
    lam /= total;
  }
  const std::vector<int>& vs = tri.simplices()[s].vertices;
  Point out = Point::Zero(x.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    out += lam[i] * tri.points()[vs[i]];
  return out;
}

// Largest step t in [0, 1] such that x + t d stays inside cell s.
inline double max_feasible_step(const Triangulation& tri, int s,
                                const Point& x, const Point& d) {
  const Eigen::VectorXd lx = tri.barycentric(s, x);
  const Eigen::VectorXd ld = tri.barycentric(s, x + d) - lx;
  double t = 1.0;
  for (Eigen::Index i = 0; i < lx.size(); ++i)
    if (ld[i] < 0.0) t = std::min(t, std::max(0.0, lx[i]) / (-ld[i]));
  return t;
}

// Projected Newton descent for the cell acquisition, started at x0 (assumed
// inside).  Backtracks along the feasible segment; the +2K identity shift
// makes the model locally convex for any reasonable K.
inline Point newton_polish(const Triangulation& tri, int s,
                           const CellAcquisition& g, Point x, double diameter,
                           double grad_tol) {
  for (int iter = 0; iter < 50; ++iter) {
    const Point grad = g.gradient(x);
    if (grad.norm() * diameter <= grad_tol) break;
    Point dir;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g.hessian(x));
    if (ldlt.info() == Eigen::Success) {
      dir = -ldlt.solve(grad);
    }
    if (ldlt.info() != Eigen::Success || !dir.allFinite() ||
        dir.dot(grad) >= 0.0) {
      dir = -grad / (2.0 * g.K);  // steepest descent, convexity-scaled
    }
    double t = max_feasible_step(tri, s, x, dir);
    if (t <= 0.0) break;
    const double g0 = g.value(x);
    const double slope = dir.dot(grad);
    bool moved = false;
    for (int half = 0; half < 40; ++half) {
      const Point trial = x + t * dir;
      if (g.value(trial) <= g0 + 1e-4 * t * slope) {
        x = clamp_into_cell(tri, s, trial);
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved || t * dir.norm() <= 1e-12 * diameter) break;
  }
  return x;
}

// Barycentric lattice sweep with `per_edge` samples along each edge; used
// when the smooth solve fails, and cheap insurance in low dimension.
inline void lattice_scan(const Triangulation& tri, int s,
                         const CellAcquisition& g, int per_edge, Point* argmin,
                         double* minval) {
  const std::vector<int>& vs = tri.simplices()[s].vertices;
  const int nv = static_cast<int>(vs.size());
  const int steps = per_edge - 1;
  std::vector<int> comp(nv, 0);
  comp[0] = steps;
  while (true) {
    Point x = Point::Zero(tri.dimension());
    for (int i = 0; i < nv; ++i)
      x += (static_cast<double>(comp[i]) / steps) * tri.points()[vs[i]];
    const double val = g.value(x);
    if (std::isfinite(val) && val < *minval) {
      *minval = val;
      *argmin = x;
    }
    // next composition of `steps` into nv nonnegative parts
    int i = 0;
    while (i < nv - 1 && comp[i] == 0) ++i;
    if (i == nv - 1) break;
    const int carry = comp[i];
    comp[i] = 0;
    comp[0] = carry - 1;
    ++comp[i + 1];
  }
}

}  // namespace detail

// Exploration search: minimizes s_c(x) = p(x) - K e(x) over the hull by
// solving one smooth subproblem per Delaunay cell (e is quadratic within
// each cell).  Vertices are always candidates, so the result never exceeds
// the surrogate value at any datapoint.  Ties go to the lowest cell index.
inline ContinuousSearchResult continuous_search(const SearchContext& ctx) {
  const Triangulation& tri = *ctx.triangulation;
  const std::vector<Simplex>& cells = tri.simplices();
  if (cells.empty()) throw std::invalid_argument("continuous_search: empty");

  double diameter = 0.0;
  for (const Point& p : tri.points())
    for (const Point& q : tri.points())
      diameter = std::max(diameter, (p - q).norm());
  if (diameter <= 0.0) diameter = 1.0;

  ContinuousSearchResult best;
  int failures = 0;
  for (int s = 0; s < static_cast<int>(cells.size()); ++s) {
    detail::CellAcquisition g{ctx.model, &cells[s], ctx.K};
    const std::vector<int>& vs = cells[s].vertices;

    Point local_arg;
    double local_min = std::numeric_limits<double>::infinity();
    try {
      double vscale = 0.0;
      for (int v : vs) {
        const Point& xv = tri.points()[v];
        const double val = g.value(xv);
        vscale = std::max(vscale, std::abs(val));
        if (val < local_min) {
          local_min = val;
          local_arg = xv;
        }
      }
      const double grad_tol = 1e-8 * std::max(1.0, vscale);

      Point bary = Point::Zero(tri.dimension());
      for (int v : vs) bary += tri.points()[v];
      bary /= static_cast<double>(vs.size());
      for (const Point& start :
           {bary, detail::clamp_into_cell(tri, s, cells[s].circumcenter)}) {
        const Point xn =
            detail::newton_polish(tri, s, g, start, diameter, grad_tol);
        const double val = g.value(xn);
        if (std::isfinite(val) && val < local_min) {
          local_min = val;
          local_arg = xn;
        }
      }
      if (tri.dimension() <= 2) {
        detail::lattice_scan(tri, s, g, 11, &local_arg, &local_min);
        // Polish from the lattice winner so narrow basins between lattice
        // nodes are still resolved to full precision.
        const Point xn = detail::newton_polish(tri, s, g, local_arg, diameter,
                                               grad_tol);
        const double val = g.value(xn);
        if (std::isfinite(val) && val < local_min) {
          local_min = val;
          local_arg = xn;
        }
      }
      if (!std::isfinite(local_min)) throw OptimizationFailure("non-finite");
    } catch (const std::exception&) {
      // Smooth path failed in this cell; retry with the lattice alone.
      local_min = std::numeric_limits<double>::infinity();
      try {
        detail::lattice_scan(tri, s, g, 11, &local_arg, &local_min);
      } catch (const std::exception&) {
      }
      if (!std::isfinite(local_min)) {
        ++failures;
        continue;
      }
    }

    if (local_min < best.value) {
      best.value = local_min;
      best.location = local_arg;
      best.simplex = s;
    }
  }
  if (best.simplex < 0 || failures == static_cast<int>(cells.size()))
    throw OptimizationFailure("continuous_search: every cell failed");
  return best;
}

enum class IterationKind { supplemental, identifying, refinement };

struct IterationDecision {
  IterationKind kind = IterationKind::refinement;
  int supplement_index = -1;  // set for supplemental iterations
  Point identify_location;    // set for identifying iterations (on-grid)
};

// The three-way branch of the main loop, as pure logic:
//   supplemental  if s_c(z) > s_d(x_j) and N_j < gamma 2^level,
//   identifying   otherwise, if the quantized z is a new point,
//   refinement    otherwise.
inline IterationDecision classify_iteration(
    double continuous_value, const DiscreteSearchResult& discrete,
    std::int64_t samples_at_discrete_min, double gamma, int level,
    bool quantized_is_member, const Point& quantized_location) {
  IterationDecision d;
  const double cap = std::ldexp(gamma, level);
  if (continuous_value > discrete.value &&
      static_cast<double>(samples_at_discrete_min) < cap) {
    d.kind = IterationKind::supplemental;
    d.supplement_index = discrete.index;
  } else if (!quantized_is_member) {
    d.kind = IterationKind::identifying;
    d.identify_location = quantized_location;
  } else {
    d.kind = IterationKind::refinement;
  }
  return d;
}

}  // namespace adogs
