#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "alphadogs/errors.hpp"
#include "alphadogs/sampling.hpp"

namespace adogs {

// Quadratic bowl with additive Gaussian noise:
//   f(x) = (5/n) sum_i (x_i - 0.3)^2,   g(x) = f(x) + N(0, noise^2),
// minimized at x = (0.3, ..., 0.3) with f = 0.
class ParabolaProblem final : public MeanObjective {
 public:
  explicit ParabolaProblem(int dim, double noise = 0.3) : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("ParabolaProblem: dim >= 1");
    if (!(noise >= 0.0))
      throw std::invalid_argument("ParabolaProblem: noise >= 0");
    model_.kind = UncertaintyModel::Kind::iid;
    model_.amplitude = noise;
    model_.theta = 0.5;
  }

  int dimension() const override { return dim_; }
  const UncertaintyModel& uncertainty_model() const override { return model_; }

  double draw_sample(const Point& x, RngStream& rng) const override {
    return *truth(x) + rng.normal(0.0, model_.amplitude);
  }

  std::optional<double> truth(const Point& x) const override {
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      s += (x[j] - 0.3) * (x[j] - 0.3);
    return 5.0 / dim_ * s;
  }
  std::optional<double> truth_minimum() const override { return 0.0; }
  std::optional<Point> minimizer() const override {
    return Point::Constant(dim_, 0.3);
  }

 private:
  int dim_;
  UncertaintyModel model_;
};

// Rescaled Schwefel objective with additive Gaussian noise:
//   f(x) = 0.83797 - (1/n) sum_i x_i sin(sqrt(500 x_i)),   x in [0,1]^n.
// Each coordinate section has four local minima; the global minimizer is
// x_i = 0.8419374927..., where f is within 5e-6 of zero.
class SchwefelProblem final : public MeanObjective {
 public:
  static constexpr double kArgmin = 0.841937492719964;

  explicit SchwefelProblem(int dim, double noise = 0.3) : dim_(dim) {
    if (dim < 1) throw std::invalid_argument("SchwefelProblem: dim >= 1");
    if (!(noise >= 0.0))
      throw std::invalid_argument("SchwefelProblem: noise >= 0");
    model_.kind = UncertaintyModel::Kind::iid;
    model_.amplitude = noise;
    model_.theta = 0.5;
  }

  int dimension() const override { return dim_; }
  const UncertaintyModel& uncertainty_model() const override { return model_; }

  double draw_sample(const Point& x, RngStream& rng) const override {
    return *truth(x) + rng.normal(0.0, model_.amplitude);
  }

  std::optional<double> truth(const Point& x) const override {
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j)
      s += x[j] * std::sin(std::sqrt(500.0 * x[j]));
    return 0.83797 - s / dim_;
  }
  std::optional<double> truth_minimum() const override {
    return *truth(Point::Constant(dim_, kArgmin));
  }
  std::optional<Point> minimizer() const override {
    return Point::Constant(dim_, kArgmin);
  }

 private:
  int dim_;
  UncertaintyModel model_;
};

// Classical Lorenz convection system state.
struct OdeState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double t = 0.0;
};

struct LorenzParams {
  double s = 10.0;     // Prandtl-like coupling
  double rho = 28.0;   // Rayleigh-like forcing
  double beta = 8.0 / 3.0;
};

namespace detail {
inline void lorenz_rhs(const OdeState& u, const LorenzParams& p, double* d) {
  d[0] = p.s * (u.y - u.x);
  d[1] = -u.x * u.z + p.rho * u.x - u.y;
  d[2] = u.x * u.y - p.beta * u.z;
}
}  // namespace detail

// One classical fourth-order Runge-Kutta step of size h.
inline OdeState rk4_step(const OdeState& u, const LorenzParams& p, double h) {
  double k1[3], k2[3], k3[3], k4[3];
  detail::lorenz_rhs(u, p, k1);
  OdeState u2{u.x + 0.5 * h * k1[0], u.y + 0.5 * h * k1[1],
              u.z + 0.5 * h * k1[2], u.t + 0.5 * h};
  detail::lorenz_rhs(u2, p, k2);
  OdeState u3{u.x + 0.5 * h * k2[0], u.y + 0.5 * h * k2[1],
              u.z + 0.5 * h * k2[2], u.t + 0.5 * h};
  detail::lorenz_rhs(u3, p, k3);
  OdeState u4{u.x + h * k3[0], u.y + h * k3[1], u.z + h * k3[2], u.t + h};
  detail::lorenz_rhs(u4, p, k4);
  return OdeState{
      u.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
      u.y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
      u.z + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
      u.t + h};
}

// Statistics-matching objective on the Lorenz attractor.  The design
// variables are (rho, beta), mapped from the unit square to the physical
// box; the cost compares the time-averaged mean and standard deviation of
// Z(t) against target values:
//   cost = |mean(Z) - target_mean| + |std(Z) - target_std|.
// A sample is one integrator step; the first transient_steps steps of each
// point's trajectory are discarded before averaging begins.
class LorenzProblem final : public StochasticObjective {
 public:
  struct Config {
    double rho_min = 24.0, rho_max = 29.15;
    double beta_min = 1.8, beta_max = 4.0;
    double s = 10.0;
    double h = 0.05;
    std::int64_t transient_steps = 2600;  // 130 time units at h = 0.05
    double target_mean = 23.57;
    double target_std = 8.67;
  };

  LorenzProblem() : LorenzProblem(Config{}) {}
  explicit LorenzProblem(Config cfg) : cfg_(cfg) {
    if (!(cfg.h > 0.0)) throw std::invalid_argument("LorenzProblem: h > 0");
    if (cfg.transient_steps < 0)
      throw std::invalid_argument("LorenzProblem: transient >= 0");
    model_.kind = UncertaintyModel::Kind::empirical_sqrt;
    model_.amplitude = 1.0;  // placeholder until an uncertainty fit runs
    model_.theta = 0.5;
    model_.time_per_sample = cfg.h;
  }

  int dimension() const override { return 2; }
  const UncertaintyModel& uncertainty_model() const override { return model_; }
  void set_uncertainty_amplitude(double a) {
    if (!(a >= 0.0))
      throw std::invalid_argument("LorenzProblem: amplitude >= 0");
    model_.amplitude = a;
  }
  const Config& config() const { return cfg_; }

  std::int64_t transient_samples() const override {
    return cfg_.transient_steps;
  }

  Point to_physical(const Point& x) const override {
    Point p(2);
    p[0] = cfg_.rho_min + (cfg_.rho_max - cfg_.rho_min) * x[0];
    p[1] = cfg_.beta_min + (cfg_.beta_max - cfg_.beta_min) * x[1];
    return p;
  }
  std::vector<std::string> coordinate_names() const override {
    return {"rho", "beta"};
  }

  // state.extra = {X, Y, Z, t, sum(Z), sum(Z^2)}.
  double extend(const Point& x, std::int64_t count,
                SampleState& state) const override {
    if (count < 0) throw std::invalid_argument("extend: negative count");
    const Point phys = to_physical(x);
    LorenzParams p{cfg_.s, phys[0], phys[1]};

    if (state.extra.empty()) {
      // Fresh point: jittered canonical initial condition, then the
      // transient, both charged to this point's own stream/history.
      state.extra.assign(6, 0.0);
      state.extra[0] = 0.0 + state.rng.uniform(-0.05, 0.05);
      state.extra[1] = 1.0 + state.rng.uniform(-0.05, 0.05);
      state.extra[2] = 1.05 + state.rng.uniform(-0.05, 0.05);
      state.extra[3] = 0.0;
      state.transient_remaining = cfg_.transient_steps;
    }
    OdeState u{state.extra[0], state.extra[1], state.extra[2],
               state.extra[3]};
    while (state.transient_remaining > 0) {
      u = rk4_step(u, p, cfg_.h);
      --state.transient_remaining;
    }
    double sum_z = state.extra[4];
    double sum_zz = state.extra[5];
    for (std::int64_t k = 0; k < count; ++k) {
      u = rk4_step(u, p, cfg_.h);
      sum_z += u.z;
      sum_zz += u.z * u.z;
    }
    if (!std::isfinite(u.x) || !std::isfinite(u.y) || !std::isfinite(u.z))
      throw NonFiniteState("LorenzProblem: trajectory diverged");
    state.extra[0] = u.x;
    state.extra[1] = u.y;
    state.extra[2] = u.z;
    state.extra[3] = u.t;
    state.extra[4] = sum_z;
    state.extra[5] = sum_zz;
    state.samples_taken += count;

    const double m = static_cast<double>(state.samples_taken);
    if (m <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double mean = sum_z / m;
    const double var = std::max(0.0, sum_zz / m - mean * mean);
    return std::abs(mean - cfg_.target_mean) +
           std::abs(std::sqrt(var) - cfg_.target_std);
  }

  // Convenience wrapper taking an averaging-time increment instead of a
  // step count.
  double extend_time(const Point& x, double added_time,
                     SampleState& state) const {
    const auto steps = static_cast<std::int64_t>(
        std::llround(added_time / cfg_.h));
    if (steps < 0) throw std::invalid_argument("extend_time: negative time");
    return extend(x, steps, state);
  }

 private:
  Config cfg_;
  UncertaintyModel model_;
};

}  // namespace adogs
