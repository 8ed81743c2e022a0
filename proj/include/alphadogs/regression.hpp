#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/grid.hpp"

namespace adogs {

// Measurements with per-point standard deviations.  sigma = 0 marks an
// exact (noise-free) value; such points are interpolated by construction.
struct WeightedDataset {
  std::vector<Point> points;
  Eigen::VectorXd values;
  Eigen::VectorXd sigmas;

  int size() const { return static_cast<int>(points.size()); }
};

// Smooth model of the objective used by the search routines.  Separate from
// RegressionModel so tests can drive the search with exact closed forms.
struct SurrogateModel {
  virtual ~SurrogateModel() = default;
  virtual double value(const Point& x) const = 0;
  virtual Eigen::VectorXd gradient(const Point& x) const = 0;
  virtual Eigen::MatrixXd hessian(const Point& x) const = 0;
};

class RegressionModel;

namespace detail {
RegressionModel finish_model(const WeightedDataset&, Eigen::VectorXd,
                             Eigen::VectorXd, double, double);
}

// Cubic polyharmonic spline with a linear tail,
//   p(x) = sum_i w_i |x - x_i|^3 + v_0 + v_1 . x,
// fitted by the noise-weighted smoothing system below.  rho = 0 is exact
// interpolation; rho = +inf degenerates to the weighted linear fit (w = 0).
class RegressionModel : public SurrogateModel {
 public:
  double value(const Point& x) const override {
    double s = v_[0] + v_.tail(x.size()).dot(x);
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      const double r = (x - centers_[i]).norm();
      s += w_[static_cast<Eigen::Index>(i)] * r * r * r;
    }
    return s;
  }

  Eigen::VectorXd gradient(const Point& x) const override {
    Eigen::VectorXd g = v_.tail(x.size());
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      const Point d = x - centers_[i];
      g += w_[static_cast<Eigen::Index>(i)] * 3.0 * d.norm() * d;
    }
    return g;
  }

  Eigen::MatrixXd hessian(const Point& x) const override {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      const Point d = x - centers_[i];
      const double r = d.norm();
      if (r == 0.0) continue;  // hessian of r^3 vanishes at the centre
      h += w_[static_cast<Eigen::Index>(i)] * 3.0 *
           (r * Eigen::MatrixXd::Identity(n, n) + d * d.transpose() / r);
    }
    return h;
  }

  const std::vector<Point>& centers() const { return centers_; }
  const Eigen::VectorXd& rbf_weights() const { return w_; }
  // [constant, slope...] of the linear tail.
  const Eigen::VectorXd& linear_coefficients() const { return v_; }

  // Smoothing parameter actually used; +inf marks the pure linear branch.
  double rho() const { return rho_; }
  bool is_linear() const { return std::isinf(rho_); }
  // Sum of squared scaled residuals at the fitted coefficients.
  double criterion_value() const { return criterion_; }
  // Largest |p(x_i) - y_i| / sigma_i over the noisy (sigma > 0) points.
  double max_strictness_ratio() const { return max_ratio_; }
  bool strictness_satisfied() const { return strict_ok_; }

 private:
  friend RegressionModel detail::finish_model(const WeightedDataset&,
                                              Eigen::VectorXd, Eigen::VectorXd,
                                              double, double);

  std::vector<Point> centers_;
  Eigen::VectorXd w_;
  Eigen::VectorXd v_;
  double rho_ = 0.0;
  double criterion_ = 0.0;
  double max_ratio_ = 0.0;
  bool strict_ok_ = true;
};

namespace detail {

constexpr double kSigmaFloor = 1e-12;

struct KktWorkspace {
  Eigen::MatrixXd phi;   // M x M cubic kernel, no regularization diagonal
  Eigen::MatrixXd vmat;  // (n+1) x M polynomial constraint block
  Eigen::VectorXd y;
  Eigen::VectorXd sig2;  // raw sigma_i^2
  int m = 0;
  int q = 0;  // n + 1

  // Retained per solve for the derivative system and residual checks.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::MatrixXd a;

  explicit KktWorkspace(const WeightedDataset& ds) {
    m = ds.size();
    const int n = static_cast<int>(ds.points[0].size());
    q = n + 1;
    phi.resize(m, m);
    for (int i = 0; i < m; ++i) {
      phi(i, i) = 0.0;
      for (int j = i + 1; j < m; ++j) {
        const double r = (ds.points[i] - ds.points[j]).norm();
        phi(i, j) = phi(j, i) = r * r * r;
      }
    }
    vmat.resize(q, m);
    for (int i = 0; i < m; ++i) {
      vmat(0, i) = 1.0;
      vmat.col(i).tail(n) = ds.points[i];
    }
    y = ds.values;
    sig2 = ds.sigmas.array().square();
  }

  // Solves the smoothing system at the given rho; result is (w, v).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve(double rho) {
    a.setZero(m + q, m + q);
    a.topLeftCorner(m, m) = phi;
    a.topLeftCorner(m, m).diagonal() += rho * sig2;
    a.topRightCorner(m, q) = vmat.transpose();
    a.bottomLeftCorner(q, m) = vmat;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + q);
    rhs.head(m) = y;
    lu.compute(a);
    Eigen::VectorXd z = lu.solve(rhs);
    const double scale =
        rhs.norm() + a.cwiseAbs().rowwise().sum().maxCoeff() * z.norm();
    if (!z.allFinite() ||
        (a * z - rhs).norm() > 1e-8 * std::max(scale, 1e-300))
      throw SingularSystem("fit_regression: smoothing system is singular");
    return {z.head(m), z.tail(q)};
  }

  // d(w)/d(rho) at the last solve, from differentiating the system:
  // [F V^T; V 0][Dw; Dv] = -[diag(sigma_i^2) w; 0].
  Eigen::VectorXd weight_derivative(const Eigen::VectorXd& w) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + q);
    rhs.head(m) = -(sig2.array() * w.array()).matrix();
    return lu.solve(rhs).head(m);
  }
};

inline void validate_dataset(const WeightedDataset& ds) {
  if (ds.size() == 0)
    throw std::invalid_argument("fit_regression: empty dataset");
  const Eigen::Index n = ds.points[0].size();
  if (n == 0) throw std::invalid_argument("fit_regression: zero-dimensional");
  if (ds.values.size() != ds.size() || ds.sigmas.size() != ds.size())
    throw std::invalid_argument("fit_regression: size mismatch");
  for (const Point& p : ds.points)
    if (p.size() != n)
      throw std::invalid_argument("fit_regression: mixed dimensions");
  for (int i = 0; i < ds.size(); ++i) {
    if (!std::isfinite(ds.values[i]) || !std::isfinite(ds.sigmas[i]) ||
        ds.sigmas[i] < 0.0)
      throw std::invalid_argument("fit_regression: bad value or sigma");
  }
}

// Weighted linear least squares of y on [1, x]; the rho -> inf limit.
inline Eigen::VectorXd weighted_linear_fit(const WeightedDataset& ds) {
  const int n = static_cast<int>(ds.points[0].size());
  const int m = ds.size();
  Eigen::MatrixXd x(m, n + 1);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    const double wi = 1.0 / std::max(ds.sigmas[i], kSigmaFloor);
    x(i, 0) = wi;
    x.row(i).tail(n) = wi * ds.points[i].transpose();
    b[i] = wi * ds.values[i];
  }
  return x.colPivHouseholderQr().solve(b);
}

inline RegressionModel finish_model(const WeightedDataset& ds,
                                    Eigen::VectorXd w, Eigen::VectorXd v,
                                    double rho, double strict_beta) {
  RegressionModel model;
  model.centers_ = ds.points;
  model.w_ = std::move(w);
  model.v_ = std::move(v);
  model.rho_ = rho;
  // Exact (sigma ~ 0) points are interpolated by construction, so they are
  // held to a solve-roundoff tolerance instead of the beta * sigma bound,
  // which would amplify roundoff through the sigma floor.
  const double exact_tol = 1e-8 * (1.0 + ds.values.cwiseAbs().maxCoeff());
  double criterion = 0.0;
  double worst = 0.0;
  bool strict = true;
  for (int i = 0; i < ds.size(); ++i) {
    const double resid = model.value(ds.points[i]) - ds.values[i];
    if (ds.sigmas[i] > kSigmaFloor) {
      const double scaled = resid / ds.sigmas[i];
      criterion += scaled * scaled;
      worst = std::max(worst, std::abs(scaled));
      if (std::abs(scaled) > strict_beta * (1.0 + 1e-9)) strict = false;
    } else if (std::abs(resid) > exact_tol) {
      strict = false;
    }
  }
  model.criterion_ = criterion;
  model.max_ratio_ = worst;
  model.strict_ok_ = strict;
  return model;
}

}  // namespace detail

// Fit at a fixed smoothing parameter, skipping the criterion search and the
// strictness fallback.  rho = 0 gives exact interpolation.
inline RegressionModel fit_regression_at(const WeightedDataset& ds,
                                         double rho) {
  detail::validate_dataset(ds);
  if (!(rho >= 0.0) || !std::isfinite(rho))
    throw std::invalid_argument("fit_regression_at: rho must be finite >= 0");
  detail::KktWorkspace kkt(ds);
  auto [w, v] = kkt.solve(rho);
  return detail::finish_model(ds, std::move(w), std::move(v), rho,
                              std::numeric_limits<double>::infinity());
}

// Fits the noise-weighted smoothing spline.  The smoothing parameter is
// chosen so the sum of squared scaled residuals T(rho) equals one (Newton
// on log rho inside a maintained bracket); if even the weighted linear fit
// satisfies T <= 1 it is returned directly.  When the result violates the
// strictness bound max_i |p(x_i) - y_i| <= strict_beta * sigma_i, rho is
// halved up to 64 times and as a last resort set to zero (interpolation,
// which is strict by construction).
inline RegressionModel fit_regression(
    const WeightedDataset& ds, double strict_beta = 4.0,
    std::optional<double> rho_hint = std::nullopt) {
  detail::validate_dataset(ds);
  if (!(strict_beta > 0.0))
    throw std::invalid_argument("fit_regression: strict_beta must be > 0");

  detail::KktWorkspace kkt(ds);

  bool any_noise = false;
  for (int i = 0; i < ds.size(); ++i)
    if (ds.sigmas[i] > detail::kSigmaFloor) any_noise = true;
  if (!any_noise) {
    auto [w, v] = kkt.solve(0.0);
    return detail::finish_model(ds, std::move(w), std::move(v), 0.0,
                                strict_beta);
  }

  const auto criterion_at = [&](const Eigen::VectorXd& w) {
    double t = 0.0;
    for (int i = 0; i < ds.size(); ++i) {
      if (ds.sigmas[i] <= detail::kSigmaFloor) continue;
      // Stationarity gives p(x_i) - y_i = -rho sigma_i^2 w_i, so the
      // scaled residual is rho sigma_i w_i; rho is folded in by callers.
      t += kkt.sig2[i] * w[i] * w[i];
    }
    return t;  // T(rho) = rho^2 * t
  };

  // Linear branch: T(inf) <= 1 means even the stiffest model under-runs
  // the noise level, so no spline part is warranted.
  {
    const Eigen::VectorXd lin = detail::weighted_linear_fit(ds);
    double t_inf = 0.0;
    for (int i = 0; i < ds.size(); ++i) {
      if (ds.sigmas[i] <= detail::kSigmaFloor) continue;
      double fit = lin[0];
      fit += lin.tail(ds.points[i].size()).dot(ds.points[i]);
      const double r = (fit - ds.values[i]) / ds.sigmas[i];
      t_inf += r * r;
    }
    if (t_inf <= 1.0) {
      RegressionModel model = detail::finish_model(
          ds, Eigen::VectorXd::Zero(ds.size()), lin,
          std::numeric_limits<double>::infinity(), strict_beta);
      if (model.strictness_satisfied()) return model;
      // Hand over to the strictness fallback from a very stiff finite rho.
      double rho = 1e16;
      for (int k = 0; k < 64; ++k) {
        auto [w, v] = kkt.solve(rho);
        RegressionModel m2 = detail::finish_model(ds, std::move(w),
                                                  std::move(v), rho,
                                                  strict_beta);
        if (m2.strictness_satisfied()) return m2;
        rho *= 0.5;
      }
      auto [w, v] = kkt.solve(0.0);
      return detail::finish_model(ds, std::move(w), std::move(v), 0.0,
                                  strict_beta);
    }
  }

  // Bracket the criterion root in rho, expanding / shrinking by factors
  // of 16 from the warm start.
  double rho = 1.0;
  if (rho_hint && std::isfinite(*rho_hint) && *rho_hint > 0.0)
    rho = *rho_hint;
  auto [w, v] = kkt.solve(rho);
  double t = rho * rho * criterion_at(w);
  double lo = rho, hi = rho;
  if (t < 1.0) {
    for (int k = 0; k < 90 && t < 1.0; ++k) {
      lo = hi;
      hi *= 16.0;
      std::tie(w, v) = kkt.solve(hi);
      t = hi * hi * criterion_at(w);
    }
    if (t < 1.0)
      throw NonConvergence("fit_regression: criterion bracket failed (high)");
    rho = hi;
  } else {
    for (int k = 0; k < 90 && t >= 1.0; ++k) {
      hi = lo;
      lo /= 16.0;
      std::tie(w, v) = kkt.solve(lo);
      t = lo * lo * criterion_at(w);
    }
    if (t >= 1.0)
      throw NonConvergence("fit_regression: criterion bracket failed (low)");
    rho = lo;
  }

  // Newton on u = log rho with bisection safeguarding; T is smooth and
  // increasing so this converges fast once bracketed.
  for (int it = 0; it < 160; ++it) {
    std::tie(w, v) = kkt.solve(rho);
    const double tw = criterion_at(w);
    t = rho * rho * tw;
    if (std::abs(t - 1.0) <= 1e-9) break;
    if (t > 1.0)
      hi = rho;
    else
      lo = rho;
    const Eigen::VectorXd dw = kkt.weight_derivative(w);
    double tp = 2.0 * rho * tw;  // dT/drho
    for (int i = 0; i < ds.size(); ++i)
      if (ds.sigmas[i] > detail::kSigmaFloor)
        tp += 2.0 * rho * rho * kkt.sig2[i] * w[i] * dw[i];
    double next = rho;
    const double dfdu = rho * tp;  // derivative in u = log rho
    if (dfdu > 0.0 && std::isfinite(dfdu)) {
      next = std::exp(std::log(rho) - (t - 1.0) / dfdu);
    }
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
    rho = next;
  }
  std::tie(w, v) = kkt.solve(rho);
  t = rho * rho * criterion_at(w);
  if (std::abs(t - 1.0) > 1e-6)
    throw NonConvergence("fit_regression: criterion solve did not converge");

  RegressionModel model =
      detail::finish_model(ds, std::move(w), std::move(v), rho, strict_beta);
  if (model.strictness_satisfied()) return model;

  for (int k = 0; k < 64; ++k) {
    rho *= 0.5;
    auto [w2, v2] = kkt.solve(rho);
    RegressionModel m2 =
        detail::finish_model(ds, std::move(w2), std::move(v2), rho,
                             strict_beta);
    if (m2.strictness_satisfied()) return m2;
  }
  auto [w3, v3] = kkt.solve(0.0);
  return detail::finish_model(ds, std::move(w3), std::move(v3), 0.0,
                              strict_beta);
}

// Scaled absolute residuals |p(x_i) - y_i| / max(sigma_i, floor).
inline Eigen::VectorXd strictness_residuals(const RegressionModel& model,
                                            const WeightedDataset& ds) {
  Eigen::VectorXd out(ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    const double resid = model.value(ds.points[i]) - ds.values[i];
    out[i] = std::abs(resid) / std::max(ds.sigmas[i], detail::kSigmaFloor);
  }
  return out;
}

}  // namespace adogs
