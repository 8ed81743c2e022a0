#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/grid.hpp"

namespace adogs {

// One cell of a triangulation.  Vertex indices refer to Triangulation::points()
// and are kept sorted so cells compare canonically.
struct Simplex {
  std::vector<int> vertices;
  Point circumcenter;
  double circumradius = 0.0;
};

namespace detail {

using LVec = std::vector<long double>;

// Gaussian elimination with partial pivoting on long double, shared by the
// circumcentre solve and the volume determinant.  Returns false when the
// matrix is numerically singular at the given pivot threshold.
inline bool lsolve(std::vector<LVec>& a, LVec& b, long double pivot_tol) {
  const int n = static_cast<int>(a.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) <= pivot_tol) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < n; ++r) {
      const long double f = a[r][col] / a[col][col];
      if (f == 0.0L) continue;
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int col = n - 1; col >= 0; --col) {
    long double s = b[col];
    for (int c = col + 1; c < n; ++c) s -= a[col][c] * b[c];
    b[col] = s / a[col][col];
  }
  return true;
}

}  // namespace detail

// Circumcentre and circumradius of the simplex spanned by `vertices`
// (n + 1 points in n dimensions).  Throws DegenerateSimplex when the points
// are affinely dependent.
inline std::pair<Point, double> circumsphere(const std::vector<Point>& vertices) {
  if (vertices.empty()) throw DegenerateSimplex("circumsphere: no vertices");
  const int n = static_cast<int>(vertices[0].size());
  if (static_cast<int>(vertices.size()) != n + 1)
    throw DegenerateSimplex("circumsphere: need n + 1 vertices");

  // Rows: 2 (v_k - v_0) . z = |v_k|^2 - |v_0|^2, k = 1..n.
  std::vector<detail::LVec> a(n, detail::LVec(n));
  detail::LVec b(n);
  long double scale = 0.0L;
  for (int k = 1; k <= n; ++k) {
    long double rhs = 0.0L;
    for (int j = 0; j < n; ++j) {
      const long double v0 = vertices[0][j];
      const long double vk = vertices[k][j];
      a[k - 1][j] = 2.0L * (vk - v0);
      rhs += vk * vk - v0 * v0;
      scale = std::max(scale, std::fabs(vk - v0));
    }
    b[k - 1] = rhs;
  }
  if (!detail::lsolve(a, b, 1e-14L * std::max(scale, 1e-300L)))
    throw DegenerateSimplex("circumsphere: affinely dependent vertices");

  Point centre(n);
  long double r2 = 0.0L;
  for (int j = 0; j < n; ++j) {
    centre[j] = static_cast<double>(b[j]);
    const long double d = static_cast<long double>(vertices[0][j]) - b[j];
    r2 += d * d;
  }
  return {centre, static_cast<double>(std::sqrt(r2))};
}

// Delaunay triangulation in n <= 6 dimensions, built incrementally with the
// Bowyer-Watson cavity algorithm.  Construction starts from one far-away
// super-simplex; inserting a point removes every cell whose circumsphere
// strictly contains it and re-fans the cavity boundary from the point.
// Circumsphere data is carried in long double so the strict-containment
// test stays reliable even for the huge spheres the super-simplex induces.
//
// A built value is immutable through the const interface; insert() mutates
// in place and requires exclusive access.
class Triangulation {
 public:
  static constexpr int kMaxDimension = 6;

  // Triangulates `pts` (at least n + 1 of them, affinely spanning).
  static Triangulation build(const std::vector<Point>& pts) {
    if (pts.empty()) throw DegeneratePointSet("build: empty point set");
    const int dim = static_cast<int>(pts[0].size());
    if (dim < 1 || dim > kMaxDimension)
      throw std::invalid_argument("build: dimension must be in [1, 6]");
    if (static_cast<int>(pts.size()) < dim + 1)
      throw DegeneratePointSet("build: need at least n + 1 points");

    Triangulation t;
    t.dim_ = dim;
    t.init_scale(pts);
    t.make_super_simplex();
    for (const Point& p : pts) {
      t.check_new_point(p);
      t.append_point(p);
      t.carve(static_cast<int>(t.lpts_.size()) - 1);
    }
    t.strip_super();
    if (t.cells_.empty())
      throw DegeneratePointSet("build: points are affinely dependent");
    t.refresh_snapshot();
    return t;
  }

  // Adds one point lying inside the current hull.  The result is identical
  // to rebuilding from scratch with the point appended to the input list.
  void insert(const Point& p) {
    check_new_point(p);
    locate(p);  // throws OutsideHull if p is not covered
    append_point(p);
    carve(static_cast<int>(lpts_.size()) - 1);
    refresh_snapshot();
  }

  int dimension() const { return dim_; }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<Simplex>& simplices() const { return simplices_; }

  // Barycentric coordinates of x with respect to cell s (size n + 1).
  Eigen::VectorXd barycentric(int s, const Point& x) const {
    const std::vector<int>& vs = simplices_[s].vertices;
    Eigen::MatrixXd a(dim_, dim_);
    Eigen::VectorXd rhs = x - points_[vs[0]];
    for (int k = 1; k <= dim_; ++k)
      a.col(k - 1) = points_[vs[k]] - points_[vs[0]];
    Eigen::VectorXd mu = a.partialPivLu().solve(rhs);
    Eigen::VectorXd lambda(dim_ + 1);
    lambda[0] = 1.0 - mu.sum();
    lambda.tail(dim_) = mu;
    return lambda;
  }

  // Index of the first cell containing x, with a -1e-9 slack on the
  // barycentric coordinates so facet points belong to both neighbours.
  int locate(const Point& x) const {
    if (static_cast<int>(x.size()) != dim_)
      throw std::invalid_argument("locate: dimension mismatch");
    for (int s = 0; s < static_cast<int>(simplices_.size()); ++s)
      if (barycentric(s, x).minCoeff() >= -kInsideTol) return s;
    throw OutsideHull("locate: point is outside the triangulated hull");
  }

  // Local remoteness of cell s at x: R_s^2 - |x - Z_s|^2.  Defined for any
  // x; nonnegative exactly on the closed circumball.
  double local_remoteness(int s, const Point& x) const {
    const Simplex& sx = simplices_[s];
    const double d2 = (x - sx.circumcenter).squaredNorm();
    return sx.circumradius * sx.circumradius - d2;
  }

  // Remoteness e(x): the local value of the cell containing x.  Continuous
  // across facets, zero at every datapoint, positive elsewhere in the hull.
  double remoteness(const Point& x) const {
    return std::max(0.0, local_remoteness(locate(x), x));
  }

  // Worst normalized Delaunay margin over all (cell, non-member point)
  // pairs: min of (|q - Z|^2 - R^2) / R^2.  Nonnegative for an exact
  // Delaunay triangulation; slightly negative values only for points that
  // are numerically cospherical.
  double validity_margin() const {
    long double worst = std::numeric_limits<long double>::infinity();
    for (const Cell& c : cells_) {
      for (int q = 0; q < static_cast<int>(points_.size()); ++q) {
        const int iq = q + dim_ + 1;
        if (std::find(c.vertices.begin(), c.vertices.end(), iq) !=
            c.vertices.end())
          continue;
        long double d2 = 0.0L;
        for (int j = 0; j < dim_; ++j) {
          const long double d = static_cast<long double>(points_[q][j]) - c.centre[j];
          d2 += d * d;
        }
        worst = std::min(worst, (d2 - c.r2) / c.r2);
      }
    }
    return static_cast<double>(worst);
  }

 private:
  struct Cell {
    std::vector<int> vertices;  // internal indices, sorted
    detail::LVec centre;
    long double r2 = 0.0L;
  };

  static constexpr double kInsideTol = 1e-9;
  static constexpr double kSuperScale = 1e5;

  void init_scale(const std::vector<Point>& pts) {
    Point lo = pts[0], hi = pts[0];
    for (const Point& p : pts) {
      if (static_cast<int>(p.size()) != dim_)
        throw std::invalid_argument("build: inconsistent point dimensions");
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    box_lo_ = lo;
    box_hi_ = hi;
    scale_ = (hi - lo).norm() + 1.0;
    // Floor of the strictness slack for the in-sphere test, in squared
    // distance units of the data scale.
    sphere_eps_ = 1e-16L * static_cast<long double>(scale_) *
                  static_cast<long double>(scale_);
  }

  void make_super_simplex() {
    const Point c = 0.5 * (box_lo_ + box_hi_);
    const double s = kSuperScale * scale_;
    // Corner simplex v_0 = c - s*1, v_j = v_0 + 3 n s e_j: contains the
    // bounding box with a wide margin in every direction.
    std::vector<Point> verts(dim_ + 1, Point(dim_));
    verts[0] = c - s * Point::Ones(dim_);
    for (int j = 1; j <= dim_; ++j) {
      verts[j] = verts[0];
      verts[j][j - 1] += 3.0 * dim_ * s;
    }
    for (const Point& v : verts) lpts_.push_back(to_lvec(v));
    Cell super;
    super.vertices.resize(dim_ + 1);
    for (int j = 0; j <= dim_; ++j) super.vertices[j] = j;
    if (!cell_sphere(super)) throw DegenerateSimplex("super-simplex failure");
    cells_.push_back(std::move(super));
  }

  static detail::LVec to_lvec(const Point& p) {
    detail::LVec v(p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) v[j] = p[j];
    return v;
  }

  void check_new_point(const Point& p) const {
    if (static_cast<int>(p.size()) != dim_)
      throw std::invalid_argument("insert: dimension mismatch");
    const double tol = 1e-12 * scale_;
    for (const Point& q : points_)
      if ((p - q).lpNorm<Eigen::Infinity>() <= tol)
        throw DuplicatePoint("insert: coincident point");
  }

  void append_point(const Point& p) {
    points_.push_back(p);
    lpts_.push_back(to_lvec(p));
  }

  bool in_sphere(const Cell& c, const detail::LVec& p) const {
    long double d2 = 0.0L;
    for (int j = 0; j < dim_; ++j) {
      const long double d = p[j] - c.centre[j];
      d2 += d * d;
    }
    // Strictly inside only; cospherical points count as outside, so an
    // existing cell through them is kept rather than re-carved.  The slack
    // grows with r2 because roundoff in d2 - r2 does too: super-simplex
    // spheres are ~1e11 data units across, their centres come from solves
    // that can be ill-conditioned for needle-shaped cells, and symmetric
    // inputs produce exact tangencies that must classify consistently.
    const long double eps = std::max(sphere_eps_, 1e-12L * c.r2);
    return d2 < c.r2 - eps;
  }

  // Circumsphere of c from internal points; false when degenerate.
  bool cell_sphere(Cell& c) const {
    const int n = dim_;
    std::vector<detail::LVec> a(n, detail::LVec(n));
    detail::LVec b(n);
    const detail::LVec& v0 = lpts_[c.vertices[0]];
    long double scale = 0.0L;
    for (int k = 1; k <= n; ++k) {
      const detail::LVec& vk = lpts_[c.vertices[k]];
      long double rhs = 0.0L;
      for (int j = 0; j < n; ++j) {
        a[k - 1][j] = 2.0L * (vk[j] - v0[j]);
        rhs += vk[j] * vk[j] - v0[j] * v0[j];
        scale = std::max(scale, std::fabs(vk[j] - v0[j]));
      }
      b[k - 1] = rhs;
    }
    if (!detail::lsolve(a, b, 1e-16L * std::max(scale, 1e-300L))) return false;
    c.centre = std::move(b);
    c.r2 = 0.0L;
    for (int j = 0; j < n; ++j) {
      const long double d = v0[j] - c.centre[j];
      c.r2 += d * d;
    }
    return true;
  }

  // Distance from point ip to the affine hull of `facet`, via modified
  // Gram-Schmidt on the facet's edge vectors with one re-orthogonalization
  // pass.  This is the degeneracy measure for candidate cells (facet, ip):
  // absolute height in data units, which stays meaningful even when the
  // facet itself spans super-simplex distances.
  long double facet_height(const std::vector<int>& facet, int ip) const {
    const detail::LVec& f0 = lpts_[facet[0]];
    std::vector<detail::LVec> basis;
    basis.reserve(facet.size() - 1);
    for (std::size_t k = 1; k < facet.size(); ++k) {
      detail::LVec e(dim_);
      for (int j = 0; j < dim_; ++j) e[j] = lpts_[facet[k]][j] - f0[j];
      for (int pass = 0; pass < 2; ++pass) {
        for (const detail::LVec& b : basis) {
          long double dot = 0.0L;
          for (int j = 0; j < dim_; ++j) dot += e[j] * b[j];
          for (int j = 0; j < dim_; ++j) e[j] -= dot * b[j];
        }
      }
      long double nrm2 = 0.0L;
      for (int j = 0; j < dim_; ++j) nrm2 += e[j] * e[j];
      const long double nrm = std::sqrt(nrm2);
      if (nrm <= 0.0L) return 0.0L;  // facet itself is flat
      for (int j = 0; j < dim_; ++j) e[j] /= nrm;
      basis.push_back(std::move(e));
    }
    detail::LVec r(dim_);
    for (int j = 0; j < dim_; ++j) r[j] = lpts_[ip][j] - f0[j];
    for (int pass = 0; pass < 2; ++pass) {
      for (const detail::LVec& b : basis) {
        long double dot = 0.0L;
        for (int j = 0; j < dim_; ++j) dot += r[j] * b[j];
        for (int j = 0; j < dim_; ++j) r[j] -= dot * b[j];
      }
    }
    long double h2 = 0.0L;
    for (int j = 0; j < dim_; ++j) h2 += r[j] * r[j];
    return std::sqrt(h2);
  }

  // Bowyer-Watson cavity step for internal point index ip.
  void carve(int ip) {
    const detail::LVec& p = lpts_[ip];

    std::vector<char> bad(cells_.size(), 0);
    bool any_bad = false;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (in_sphere(cells_[i], p)) {
        bad[i] = 1;
        any_bad = true;
      }
    }
    if (!any_bad)
      throw OutsideHull("insert: point not covered by any circumsphere");

    // Facets of the cavity boundary appear in exactly one bad cell.
    std::map<std::vector<int>, int> facet_count;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (!bad[i]) continue;
      const std::vector<int>& vs = cells_[i].vertices;
      for (int omit = 0; omit <= dim_; ++omit) {
        std::vector<int> facet;
        facet.reserve(dim_);
        for (int k = 0; k <= dim_; ++k)
          if (k != omit) facet.push_back(vs[k]);
        ++facet_count[facet];
      }
    }

    std::vector<Cell> next;
    next.reserve(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (!bad[i]) next.push_back(std::move(cells_[i]));

    bool created = false;
    for (const auto& [facet, count] : facet_count) {
      if (count != 1) continue;
      // Zero height means p lies on the hyperplane of a hull facet; the
      // remaining facets already tile the cavity, so skip this one.
      if (facet_height(facet, ip) <= 1e-12L * scale_) continue;
      Cell c;
      c.vertices = facet;
      c.vertices.push_back(ip);
      std::sort(c.vertices.begin(), c.vertices.end());
      if (!cell_sphere(c))
        throw DegenerateSimplex("insert: circumsphere solve failed");
      next.push_back(std::move(c));
      created = true;
    }
    if (!created)
      throw DegenerateSimplex("insert: no cell could be created");
    cells_ = std::move(next);
  }

  void strip_super() {
    std::vector<Cell> kept;
    for (Cell& c : cells_) {
      bool touches_super = false;
      for (int v : c.vertices)
        if (v <= dim_) {
          touches_super = true;
          break;
        }
      if (!touches_super) kept.push_back(std::move(c));
    }
    cells_ = std::move(kept);
    // The super vertices stay in lpts_ so internal indices never shift;
    // they are simply unreferenced from here on.
  }

  void refresh_snapshot() {
    simplices_.clear();
    simplices_.reserve(cells_.size());
    for (const Cell& c : cells_) {
      Simplex s;
      s.vertices.reserve(dim_ + 1);
      for (int v : c.vertices) s.vertices.push_back(v - (dim_ + 1));
      Point z(dim_);
      for (int j = 0; j < dim_; ++j) z[j] = static_cast<double>(c.centre[j]);
      s.circumcenter = std::move(z);
      s.circumradius = static_cast<double>(std::sqrt(c.r2));
      simplices_.push_back(std::move(s));
    }
    // Canonical cell order so identical point sequences give identical
    // snapshots regardless of map iteration details.
    std::vector<std::size_t> order(simplices_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return simplices_[a].vertices < simplices_[b].vertices;
    });
    std::vector<Simplex> ps;
    std::vector<Cell> cs;
    ps.reserve(order.size());
    cs.reserve(order.size());
    for (std::size_t i : order) {
      ps.push_back(std::move(simplices_[i]));
      cs.push_back(std::move(cells_[i]));
    }
    simplices_ = std::move(ps);
    cells_ = std::move(cs);
  }

  int dim_ = 0;
  double scale_ = 1.0;
  long double sphere_eps_ = 0.0L;
  Point box_lo_, box_hi_;
  std::vector<Point> points_;
  std::vector<detail::LVec> lpts_;  // super vertices 0..n, then real points
  std::vector<Cell> cells_;
  std::vector<Simplex> simplices_;
};

}  // namespace adogs
